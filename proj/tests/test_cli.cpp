#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef CANDSEL_CLI
#error "CANDSEL_CLI must name the command-line binary"
#endif
#ifndef CANDSEL_DATA_DIR
#error "CANDSEL_DATA_DIR must name the data directory"
#endif

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(CANDSEL_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("candsel_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("help and exit codes") {
  CHECK(run("--help") == 0);
  for (const char* sub : {"train", "simulate", "select", "evaluate", "render"}) {
    CHECK_MESSAGE(run(std::string(sub) + " --help") == 0, sub);
  }
  CHECK(run("") == 1);
  CHECK(run("train") == 1);
  CHECK(run("train --corpus /nonexistent/x.txt --out /tmp/x.model") == 2);
  CHECK(run("evaluate --config /nonexistent/x.cfg --report /tmp/candsel_never.txt") == 2);
}

TEST_CASE("train, simulate and select round trip") {
  TempDir tmp;
  const fs::path desk = fs::path(CANDSEL_DATA_DIR) / "desk";
  const fs::path text = tmp.path / "text.txt";
  {
    std::ofstream out(text);
    out << "The form is on the desk. Please fill in the application form.\n";
  }
  const fs::path lexicon = tmp.path / "lexicon.txt";
  {
    std::ofstream out(lexicon);
    for (const char* w : {"The", "the", "form", "farm", "forth", "is", "on", "desk", "Please",
                          "fill", "till", "in", "application"}) {
      out << w << '\n';
    }
  }
  const fs::path confusion = tmp.path / "channel.txt";
  {
    std::ofstream out(confusion);
    out << "sub_rate = 0.3\n";
  }
  const fs::path model = tmp.path / "m.model";
  REQUIRE(run("train --corpus " + (desk / "train.txt").string() + " --out " + model.string()) == 0);
  const fs::path page = tmp.path / "page.txt";
  const std::string simulate = "simulate --text " + text.string() + " --lexicon " +
                               lexicon.string() + " --confusion " + confusion.string() +
                               " --seed 5 --out ";
  REQUIRE(run(simulate + page.string()) == 0);
  REQUIRE(run(simulate + (tmp.path / "page2.txt").string()) == 0);
  CHECK(slurp(page) == slurp(tmp.path / "page2.txt"));

  const fs::path selected = tmp.path / "selected.txt";
  CHECK(run("select --page " + page.string() + " --model " + model.string() + " --grammar " +
            (desk / "desk.grammar").string() + " --out " + selected.string()) == 0);
  CHECK(!slurp(selected).empty());
  CHECK(run("select --page " + page.string() + " --model " + model.string() + " --grammar " +
            (desk / "desk.grammar").string() + " --alpha 3 --out " + selected.string()) == 1);
  CHECK(run("render --word form --out " + (tmp.path / "form.pbm").string()) == 0);
  CHECK(slurp(tmp.path / "form.pbm").rfind("P1", 0) == 0);
  CHECK(run("render --word 'a#' --out " + (tmp.path / "bad.pbm").string()) == 1);
}
