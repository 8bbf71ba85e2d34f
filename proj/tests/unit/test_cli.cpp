#include <doctest.h>

#include <sstream>

#include "lsedit/cli.hpp"
#include "lsedit/table_io.hpp"
#include "support.hpp"

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lsedit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = lsedit::cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kOracle =
    "dimension=8\nnoise_sigma=0.05\nfactors=au1,au2,gender\nfactor.au1.rate=0.4\nfactor.au2.rate=0.3\n"
    "factor.gender.role=demographic\nfactor.gender.kind=binary\nfactor.gender.rate=0.5\ncorrelation.au1.au2=0.6\n";

}  // namespace

TEST_CASE("help and version exit 0") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"sample", "--help"}).code == 0);
  const auto v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({"--no-such-flag"}).code == 1);
  CHECK(run({}).code == 1);
  testing::TempDir dir("cli_usage");
  lsedit::write_text_file(dir / "o.cfg", kOracle);
  const auto missing_seed = run({"sample", "--oracle", dir / "o.cfg", "--n", "5", "--out", dir / "s.tbl"});
  CHECK(missing_seed.code == 1);
  CHECK(missing_seed.err.find("seed") != std::string::npos);
  lsedit::write_text_file(dir / "c.cfg", "sample.bogus=1\n");
  const auto bad_key = run({"--config", dir / "c.cfg", "sample", "--oracle", dir / "o.cfg", "--n", "5", "--out",
                            dir / "s.tbl", "--seed", "1"});
  CHECK(bad_key.code == 1);
  CHECK(bad_key.err.find("sample.bogus") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
  testing::TempDir dir("cli_data");
  CHECK(run({"sample", "--oracle", dir / "none.cfg", "--n", "5", "--out", dir / "s.tbl", "--seed", "1"}).code == 2);
  lsedit::write_text_file(dir / "t.tbl", "dimension=2\nattr a continuous AU\ndata\n1 2 7\n");
  CHECK(run({"fit-directions", "--table", dir / "t.tbl", "--out", dir / "b.dir"}).code == 2);
}

TEST_CASE("exhausted sampling budget exits 3") {
  testing::TempDir dir("cli_budget");
  lsedit::write_text_file(dir / "o.cfg", kOracle);
  REQUIRE(run({"sample", "--oracle", dir / "o.cfg", "--n", "400", "--out", dir / "s.tbl", "--seed", "1"}).code == 0);
  REQUIRE(run({"fit-directions", "--table", dir / "s.tbl", "--out", dir / "b.dir", "--predictors-out", dir / "p.txt"})
              .code == 0);
  const auto r = run({"sample-balanced", "--filter", "gender", "--per-cell", "50", "--predictors", dir / "p.txt",
                      "--oracle", dir / "o.cfg", "--draws-per-target", "1", "--out", dir / "bal.tbl", "--seed", "2"});
  CHECK(r.code == 3);
}

TEST_CASE("config file supplies options and the command line wins") {
  testing::TempDir dir("cli_cfg");
  lsedit::write_text_file(dir / "o.cfg", kOracle);
  lsedit::write_text_file(dir / "c.cfg", "sample.n=7\nsample.seed=3\n");
  REQUIRE(run({"--config", dir / "c.cfg", "sample", "--oracle", dir / "o.cfg", "--out", dir / "a.tbl"}).code == 0);
  CHECK(lsedit::load_attribute_table(dir / "a.tbl").rows() == 7);
  REQUIRE(run({"--config", dir / "c.cfg", "sample", "--oracle", dir / "o.cfg", "--out", dir / "b.tbl", "--n", "4"})
              .code == 0);
  CHECK(lsedit::load_attribute_table(dir / "b.tbl").rows() == 4);
}

TEST_CASE("repeated commands give byte-identical outputs") {
  testing::TempDir dir("cli_repro");
  lsedit::write_text_file(dir / "o.cfg", kOracle);
  for (const char* name : {"a", "b"}) {
    const std::string out = dir / (std::string(name) + ".tbl");
    REQUIRE(run({"sample", "--oracle", dir / "o.cfg", "--n", "50", "--out", out, "--seed", "9"}).code == 0);
  }
  CHECK(lsedit::read_text_file(dir / "a.tbl") == lsedit::read_text_file(dir / "b.tbl"));
  const auto prov = lsedit::read_text_file(dir / "a.tbl.provenance");
  CHECK(prov.find("seed=9") != std::string::npos);
  CHECK(prov.find("fnv1a=") != std::string::npos);
}
