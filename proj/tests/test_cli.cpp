#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fusionret/cli.hpp"
#include "fusionret/io.hpp"
#include "support/oracles.hpp"

using namespace fusionret;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "fusionret");
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("eval prints the recall report") {
  const auto dir = oracle::temp_dir("cli_eval");
  io::write_file(dir / "s.csv", "0.9,0.1,0.0\n0.8,0.7,0.0\n0.1,0.6,0.5\n");
  io::write_file(dir / "gt.json", R"({"queries": 3, "gallery": 3, "relevant": [[0], [1], [2]]})");
  const auto r = run({"eval", "--scores", (dir / "s.csv").string(), "--gt", (dir / "gt.json").string(), "--k", "1,2"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out == "n_queries=3\nR@1=0.3333\nR@2=1.0000\n");

  const auto clipped = run({"eval", "--scores", (dir / "s.csv").string(), "--gt", (dir / "gt.json").string(), "--k", "1,5"});
  CHECK(clipped.code == cli::kExitOk);
  CHECK(clipped.out.find("R@5=1.0000") != std::string::npos);
  CHECK(clipped.err.find("warning") != std::string::npos);
}

TEST_CASE("ensemble with one model and grid {0} writes the model back") {
  const auto dir = oracle::temp_dir("cli_ensemble");
  const Matrix m{{0.3, 0.1, 0.7}, {0.2, 0.9, 0.4}, {0.5, 0.6, 0.8}};
  io::write_matrix(m, dir / "a.npy");
  io::write_file(dir / "manifest.json", R"({"queries": 3, "gallery": 3, "relevant": [[0], [1], [2]],
                                             "models": [{"name": "a", "path": "a.npy"}]})");
  const auto r = run({"ensemble", "--manifest", (dir / "manifest.json").string(), "--grid", "0", "--raw", "--out",
                      (dir / "fused.npy").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(io::load_matrix(dir / "fused.npy") == m);
  CHECK(r.out.find("step.0.model=a\nstep.0.w=0\n") != std::string::npos);
  CHECK(r.out.find("final.R@1=0.6667") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"eval", "--scores", "x.csv"}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);

  const auto dir = oracle::temp_dir("cli_errors");
  io::write_file(dir / "bad.csv", "1,2\n3\n");
  io::write_file(dir / "gt.json", R"({"queries": 2, "gallery": 2, "relevant": [[0], [1]]})");
  const auto bad = run({"eval", "--scores", (dir / "bad.csv").string(), "--gt", (dir / "gt.json").string()});
  CHECK(bad.code == cli::kExitError);
  CHECK(bad.err.find("line 2") != std::string::npos);
  CHECK(run({"eval", "--scores", (dir / "missing.csv").string(), "--gt", (dir / "gt.json").string()}).code ==
        cli::kExitError);
  io::write_file(dir / "good.csv", "1,0\n0,1\n");
  CHECK(run({"eval", "--scores", (dir / "good.csv").string(), "--gt", (dir / "gt.json").string(), "--k", "a"}).code ==
        cli::kExitUsage);
}

TEST_CASE("lhp-sample is reproducible") {
  const auto a = run({"lhp-sample", "--seed", "5", "--count", "50"});
  const auto b = run({"lhp-sample", "--seed", "5", "--count", "50"});
  REQUIRE(a.code == cli::kExitOk);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("index,sampled_value,branch\n", 0) == 0);
  CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 51);
  CHECK_FALSE(a.out == run({"lhp-sample", "--seed", "6", "--count", "50"}).out);
}

TEST_CASE("synth, sim and select write readable files") {
  const auto dir = oracle::temp_dir("cli_pipeline");
  REQUIRE(run({"synth", "--items", "20", "--dim", "4", "--noise", "0", "--seed", "1", "--skill", "0.5",
               "--out-dir", dir.string()})
              .code == cli::kExitOk);
  REQUIRE(run({"sim", "--queries", (dir / "text.npy").string(), "--gallery", (dir / "image.npy").string(), "--out",
               (dir / "sim.npy").string()})
              .code == cli::kExitOk);
  const auto ev = run({"eval", "--scores", (dir / "sim.npy").string(), "--gt", (dir / "gt.json").string()});
  CHECK(ev.out.find("R@1=1.0000") != std::string::npos);

  const auto sel = run({"select", "--features", (dir / "image.npy").string(), "--guidance",
                        (dir / "sim.npy").string(), "--k", "3", "--out", (dir / "idx.csv").string()});
  REQUIRE(sel.code == cli::kExitOk);
  const Matrix idx = io::load_matrix(dir / "idx.csv");
  CHECK(idx.rows() == 20);
  CHECK(idx.cols() == 3);
  for (std::size_t q = 0; q < 20; ++q) CHECK(idx(q, 0) == static_cast<double>(q));

  CHECK(run({"synth", "--items", "1", "--out-dir", dir.string()}).code == cli::kExitError);
}

TEST_CASE("losses-check passes") {
  const auto r = run({"losses-check", "--seed", "3", "--instances", "20"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
