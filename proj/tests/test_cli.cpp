#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dpoly/cli.hpp"

using namespace dpoly;

namespace {

using KV = std::vector<std::pair<std::string, std::string>>;

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
  std::ostringstream out, err;
  int rc = cli_main(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

std::string validation_message(const KV& kv) {
  try {
    validate_config(kv);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("key-value text parsing") {
  auto kv = parse_kv_text("# settings\nb = 2\n\n  disorder = twopoint:p=0.2  \nseed=5\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv[0].first == "b");
  CHECK(kv[0].second == "2");
  CHECK(kv[1].first == "disorder");
  CHECK(kv[1].second == "twopoint:p=0.2");  // split at the first '=' only
  CHECK(kv[2].first == "seed");
  CHECK(kv[2].second == "5");

  SUBCASE("every malformed line is reported") {
    try {
      parse_kv_text("b 2\nexperiment = pc\nxyz\n");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      std::string msg = e.what();
      CHECK(contains(msg, "config line 1"));
      CHECK(contains(msg, "config line 3"));
      CHECK(!contains(msg, "line 2"));
    }
  }
}

TEST_CASE("validation reports every problem at once") {
  std::string msg = validation_message(
      {{"experiment", "pc"}, {"b", "1"}, {"eps", "-0.5"}, {"bogus", "1"}});
  CHECK(contains(msg, "b:"));
  CHECK(contains(msg, "eps:"));
  CHECK(contains(msg, "bogus: unknown configuration key"));
  CHECK(std::count(msg.begin(), msg.end(), '\n') >= 2);

  CHECK(contains(validation_message({{"b", "2"}}), "experiment"));
  CHECK(contains(validation_message({{"experiment", "warp"}}), "unknown experiment"));
}

TEST_CASE("experiments declare their required keys") {
  std::string msg = validation_message({{"experiment", "clt"}, {"b", "2"}});
  CHECK(contains(msg, "disorder"));
  CHECK(contains(msg, "m:"));
  CHECK(contains(msg, "eps:"));
  CHECK(contains(msg, "n:"));

  // pool-style experiments run the square recursion only
  CHECK(contains(validation_message({{"experiment", "pool"},
                                     {"b", "2"},
                                     {"s", "3"},
                                     {"disorder", "gaussian"},
                                     {"beta", "0.5"},
                                     {"n", "3"}}),
                 "s = b"));

  // clt keeps its temperature on the schedule
  CHECK(contains(validation_message({{"experiment", "clt"},
                                     {"b", "2"},
                                     {"disorder", "gaussian"},
                                     {"m", "1"},
                                     {"eps", "0"},
                                     {"n", "3"},
                                     {"beta", "0.4"}}),
                 "beta"));
}

TEST_CASE("minimal configs fill in defaults") {
  ExperimentConfig c = validate_config({{"experiment", "pc"}, {"b", "2"}, {"s", "2"}});
  CHECK(c.kind == ExperimentKind::Pc);
  CHECK(c.b == 2);
  CHECK(c.pool == 100000);
  CHECK(c.seed == 1);
  CHECK(c.trials == 1000);
  REQUIRE(c.tau.has_value());
  CHECK(*c.tau == 0.0);
}

TEST_CASE("tau defaults to the disorder skew") {
  ExperimentConfig c = validate_config({{"experiment", "oracle"},
                                        {"disorder", "twopoint:p=0.2"},
                                        {"beta", "0.5"},
                                        {"n", "2"}});
  REQUIRE(c.tau.has_value());
  CHECK(*c.tau == doctest::Approx(1.5).epsilon(1e-14));

  ExperimentConfig explicit_tau = validate_config({{"experiment", "oracle"},
                                                   {"disorder", "twopoint:p=0.2"},
                                                   {"beta", "0.5"},
                                                   {"n", "2"},
                                                   {"tau", "0.25"}});
  CHECK(*explicit_tau.tau == 0.25);
}

TEST_CASE("the schedule shorthand decomposes into m and eps") {
  ExperimentConfig c = validate_config({{"experiment", "schedule"},
                                        {"b", "2"},
                                        {"schedule", "m=2,eps=0.25"},
                                        {"n-list", "100,1000"}});
  REQUIRE(c.m.has_value());
  REQUIRE(c.eps.has_value());
  CHECK(*c.m == 2);
  CHECK(*c.eps == 0.25);
  const std::vector<std::int64_t> want{100, 1000};
  CHECK(c.n_list == want);

  ExperimentConfig swapped = validate_config({{"experiment", "schedule"},
                                              {"b", "2"},
                                              {"schedule", "eps=0.25,m=2"},
                                              {"n-list", "100"}});
  CHECK(*swapped.m == 2);

  CHECK(contains(validation_message({{"experiment", "schedule"},
                                     {"b", "2"},
                                     {"schedule", "m=2"},
                                     {"n-list", "100"}}),
                 "schedule"));
}

TEST_CASE("configs serialize to a fixed point") {
  ExperimentConfig c = validate_config({{"experiment", "variance"},
                                        {"b", "3"},
                                        {"disorder", "rademacher"},
                                        {"m", "1"},
                                        {"eps", "0.125"},
                                        {"n-list", "10,100,1000"},
                                        {"seed", "42"}});
  std::string text = serialize_config(c);
  ExperimentConfig again = validate_config(parse_kv_text(text));
  CHECK(serialize_config(again) == text);
  CHECK(again.b == 3);
  CHECK(again.n_list == c.n_list);
  CHECK(*again.eps == 0.125);
  CHECK(*again.tau == *c.tau);
}

TEST_CASE("cli runs the percolation experiment") {
  std::string out, err;
  CHECK(run_cli({"pc", "--b", "2", "--s", "2"}, &out, &err) == 0);
  CHECK(contains(out, "\"pc\": 0.61803398874989"));
  CHECK(contains(err, "\"version\""));
  CHECK(contains(err, "\"digests\""));
  CHECK(contains(err, "\"pc\""));
}

TEST_CASE("cli schedule rows carry full precision") {
  std::string out;
  CHECK(run_cli({"schedule", "--b", "2", "--m", "1", "--eps", "0", "--n-list", "100"}, &out) ==
        0);
  std::string want = "n,beta\n100," + fmt17(std::sqrt(2.0) / 10.0) + "\n";
  CHECK(out == want);
}

TEST_CASE("cli lattice info emits exact counts") {
  std::string out;
  CHECK(run_cli({"lattice", "info", "--b", "2", "--s", "2", "--n", "2"}, &out) == 0);
  CHECK(contains(out, "\"edges\": \"16\""));
  CHECK(contains(out, "\"paths\": \"8\""));
  CHECK(contains(out, "\"log10_paths\": 0.903089986991943"));
  CHECK(contains(out, "\"expected_shared_edges\": 1"));
}

TEST_CASE("cli free energy at zero temperature prints zero rows") {
  std::string out;
  CHECK(run_cli({"free-energy", "--b", "2", "--disorder", "gaussian", "--beta", "0",
                 "--n-list", "1,2", "--pool", "100"},
                &out) == 0);
  CHECK(out == "n,lambda,p_hat,gap,se\n1,0,0,0,0\n2,0,0,0,0\n");
}

TEST_CASE("cli variance reports inf above the critical epsilon") {
  std::string out;
  CHECK(run_cli({"variance", "--b", "2", "--disorder", "gaussian", "--schedule",
                 "m=1,eps=2", "--n-list", "100"},
                &out) == 0);
  CHECK(contains(out, "predicted_limit"));
  CHECK(contains(out, ",inf"));
}

TEST_CASE("cli clt writes samples to a file and stats to the stream") {
  const std::string path = "/tmp/dpoly_test_clt_samples.txt";
  std::remove(path.c_str());
  std::string out;
  CHECK(run_cli({"clt", "--b", "2", "--disorder", "gaussian", "--m", "1", "--eps", "0", "--n",
                 "3", "--pool", "2000", "--seed", "5", "--out", path},
                &out) == 0);
  CHECK(contains(out, "\"predicted_variance\": 2"));
  CHECK(contains(out, "\"count\": 2000"));
  CHECK(contains(out, "\"scale_exponent\": 1"));
  std::string samples = read_text(path);
  CHECK(std::count(samples.begin(), samples.end(), '\n') == 2000);
  std::remove(path.c_str());
}

TEST_CASE("cli oracle honors the enumeration cap") {
  std::string out, err;
  // depth 3 has 128 paths, past a cap of 10
  CHECK(run_cli({"oracle", "--b", "2", "--s", "2", "--n", "3", "--disorder", "gaussian",
                 "--beta", "0.5", "--cap", "10", "--trials", "2"},
                &out, &err) == 2);
  CHECK(contains(err, "error:"));
  CHECK(contains(err, "cap"));
}

TEST_CASE("cli exit codes separate misuse from runtime failure") {
  std::string out, err;
  CHECK(run_cli({"pc", "--wat"}, &out, &err) == 1);
  CHECK(!err.empty());

  CHECK(run_cli({"clt", "--b", "2"}, &out, &err) == 1);
  CHECK(contains(err, "disorder"));
  CHECK(contains(err, "error:"));

  CHECK(run_cli({"pc", "--config", "/nonexistent/dpoly.cfg"}, &out, &err) == 1);
  CHECK(contains(err, "config"));
}

TEST_CASE("flags override environment which overrides the config file") {
  const std::string path = "/tmp/dpoly_test_precedence.cfg";
  write_text(path,
             "b = 2\ns = 2\ndisorder = gaussian\nbeta = 0.3\nn = 1\npool = 50\nseed = 3\n");

  std::string err;
  setenv("DP_SEED", "7", 1);
  CHECK(run_cli({"pool", "--config", path, "--seed", "9"}, nullptr, &err) == 0);
  CHECK(contains(err, "\"seed\":\"9\""));

  CHECK(run_cli({"pool", "--config", path}, nullptr, &err) == 0);
  CHECK(contains(err, "\"seed\":\"7\""));
  unsetenv("DP_SEED");

  CHECK(run_cli({"pool", "--config", path}, nullptr, &err) == 0);
  CHECK(contains(err, "\"seed\":\"3\""));

  std::remove(path.c_str());
}

TEST_CASE("a config file can select the experiment without a subcommand") {
  const std::string path = "/tmp/dpoly_test_experiment.cfg";
  write_text(path, "experiment = pc\nb = 2\ns = 2\n");
  std::string out;
  CHECK(run_cli({"--config", path}, &out) == 0);
  CHECK(contains(out, "\"pc\": 0.61803398874989"));
  std::remove(path.c_str());
}

TEST_CASE("identical configs produce identical outputs and digests") {
  ExperimentConfig c = validate_config({{"experiment", "pool"},
                                        {"b", "2"},
                                        {"disorder", "gaussian"},
                                        {"beta", "0.5"},
                                        {"n", "3"},
                                        {"pool", "5000"},
                                        {"seed", "123"}});
  std::ostringstream o1, o2;
  RunReport r1 = run(c, o1);
  RunReport r2 = run(c, o2);
  CHECK(o1.str() == o2.str());
  CHECK(r1.digests == r2.digests);
  CHECK(r1.summary_json == r2.summary_json);
  std::string rows = o1.str();
  CHECK(contains(rows, "k,mean,variance,rho4_over_rho2sq,se_variance"));
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 5);  // header + levels 0..3
}

TEST_CASE("the report lands in a file when requested") {
  const std::string path = "/tmp/dpoly_test_report.json";
  std::remove(path.c_str());
  CHECK(run_cli({"pc", "--b", "2", "--s", "2", "--report", path}) == 0);
  std::string report = read_text(path);
  CHECK(contains(report, "\"version\""));
  CHECK(contains(report, "\"config\""));
  CHECK(contains(report, "\"experiment\":\"pc\""));
  std::remove(path.c_str());
}

TEST_CASE("help enumerates the experiments") {
  std::string out;
  CHECK(run_cli({"--help"}, &out) == 0);
  for (const char* name :
       {"lattice", "variance", "schedule", "pool", "clt", "oracle", "free-energy", "pc"}) {
    CHECK(contains(out, name));
  }
  CHECK(contains(out, "DP_"));

  std::string pool_help;
  CHECK(run_cli({"pool", "--help"}, &pool_help) == 0);
  CHECK(contains(pool_help, "--beta-schedule"));
}
