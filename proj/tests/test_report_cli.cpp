#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvkit/cli.hpp"
#include "fvkit/report.hpp"

using namespace fvkit;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "fvkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> lines;
  std::istringstream is(csv);
  for (std::string line; std::getline(is, line);)
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  return lines;
}

std::string meta_value(const std::string& csv, const std::string& key) {
  std::istringstream is(csv);
  const std::string prefix = "# " + key + ": ";
  for (std::string line; std::getline(is, line);)
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  return {};
}

}  // namespace

TEST_CASE("git blob hashes match git hash-object") {
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("format_double round-trips") {
  for (const double x : {0.1, 1.0 / 3, 1e-300, 123456789.0, -2.5}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1) == "1");
}

TEST_CASE("CSV and JSON layout") {
  Table t;
  t.meta("command", "demo");
  t.meta("seed", "7");
  t.seal();
  t.columns = {"a", "b"};
  t.rows = {{"1", "x"}, {"2", "y"}};
  t.foot("total", "3");
  REQUIRE(t.metadata.size() == 4);
  CHECK(t.metadata[2].first == "version");
  CHECK(t.metadata[3].first == "config_hash");
  CHECK(t.metadata[3].second == git_blob_hash("command=demo\nseed=7\nversion=" + t.metadata[2].second + "\n"));

  std::ostringstream csv;
  write_csv(t, csv);
  CHECK(csv.str() == "# command: demo\n# seed: 7\n# version: " + t.metadata[2].second + "\n# config_hash: " +
                         t.metadata[3].second + "\na,b\n1,x\n2,y\n# total: 3\n");

  const auto j = table_to_json(t);
  CHECK(j["metadata"]["seed"] == "7");
  CHECK(j["rows"][1]["b"] == "y");
  CHECK(j["footer"]["total"] == "3");
  std::ostringstream js;
  write_json(t, js);
  CHECK(nlohmann::json::parse(js.str())["columns"].size() == 2);
}

TEST_CASE("pmf overlap examples") {
  const auto two = invoke({"pmf", "overlap", "--m", "2", "--n", "2", "--theta", "1"});
  CHECK(two.code == cli::kOk);
  const auto rows = data_lines(two.out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].rfind("0,1/6,", 0) == 0);
  CHECK(rows[2].rfind("1,2/3,", 0) == 0);
  CHECK(rows[3].rfind("2,1/6,", 0) == 0);

  const auto one = invoke({"pmf", "overlap", "--m", "1", "--n", "1", "--theta", "1"});
  const auto r1 = data_lines(one.out);
  REQUIRE(r1.size() == 3);
  CHECK(r1[1].rfind("0,1/2,", 0) == 0);
  CHECK(r1[2].rfind("1,1/2,", 0) == 0);

  const auto brute = invoke({"pmf", "overlap", "--m", "3", "--n", "3", "--theta", "7/2", "--bruteforce"});
  for (const auto& line : data_lines(brute.out)) {
    if (line.rfind("r,", 0) == 0) continue;
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    const auto last = line.rfind(',');
    CHECK(line.substr(first + 1, second - first - 1) == line.substr(last + 1));
  }

  const auto zero = invoke({"pmf", "overlap", "--m", "3", "--n", "2", "--theta", "0"});
  CHECK(zero.code == cli::kOk);
  CHECK(data_lines(zero.out)[1].rfind("0,0,", 0) == 0);

  const auto single = invoke({"pmf", "overlap", "--m", "2", "--n", "2", "--r", "1"});
  REQUIRE(data_lines(single.out).size() == 2);
  CHECK(data_lines(single.out)[1].rfind("1,2/3,", 0) == 0);
}

TEST_CASE("pmf death sums to one") {
  const auto res = invoke({"pmf", "death", "--theta", "1", "--t", "1"});
  CHECK(res.code == cli::kOk);
  CHECK(std::abs(std::stod(meta_value(res.out, "sum_d_n")) - 1) < 1e-10);
  CHECK(meta_value(res.out, "working_digits") == "60");
}

TEST_CASE("exit codes") {
  CHECK(invoke({"pmf", "death", "--t", "0.001"}).code == cli::kPrecisionExhausted);
  const auto exhausted = invoke({"pmf", "death", "--t", "0.001"});
  CHECK(exhausted.err.find("smallest achievable tolerance") != std::string::npos);
  CHECK(invoke({"pmf", "death", "--theta", "-1"}).code == cli::kBadArguments);
  CHECK(invoke({"pmf", "overlap", "--theta", "x/y"}).code == cli::kBadArguments);
  CHECK(invoke({"pmf", "overlap", "--m", "2", "--n", "2", "--r", "5"}).code == cli::kBadArguments);
  CHECK(invoke({"pmf", "overlap", "--m", "12", "--n", "12", "--bruteforce"}).code == cli::kBadArguments);
  CHECK(invoke({"simulate", "brownian"}).code == cli::kBadArguments);
  CHECK(invoke({"simulate", "dar1", "--base", "discrete:0.5,0.6"}).code == cli::kBadArguments);
  CHECK(invoke({"verify", "everything"}).code == cli::kBadArguments);
  CHECK(invoke({"frobnicate"}).code == cli::kBadArguments);
  CHECK(invoke({"--help"}).code == cli::kOk);
  CHECK(invoke({"verify", "combinatorics", "--m-max", "6", "--k-max", "4", "--c-max", "4"}).code == cli::kOk);
  // A tolerance too tight for the series to meet is a verification failure.
  CHECK(invoke({"verify", "death", "--grid", "quick", "--tail-tol", "1e-40"}).code == cli::kVerificationFailed);
}

TEST_CASE("verify suites report every instance") {
  const auto urn = invoke({"verify", "urn", "--m", "5", "--n", "5", "--m-max", "6", "--theta", "1"});
  CHECK(urn.code == cli::kOk);
  CHECK(meta_value(urn.out, "failed") == "0");
  CHECK(urn.out.find("urn,") != std::string::npos);

  const auto death = invoke({"verify", "death", "--theta", "1", "--grid", "default"});
  CHECK(death.code == cli::kOk);
  const auto lines = data_lines(death.out);
  REQUIRE(lines.size() > 1);
  CHECK(lines[0] == "suite,check,instance,residual,tolerance,status");
  CHECK(std::stoul(meta_value(death.out, "checks")) == lines.size() - 1);
}

TEST_CASE("seed resolution") {
  const std::vector<std::string> cmd = {"simulate", "dar1", "--steps", "50"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = cmd;
    args.insert(args.end(), extra.begin(), extra.end());
    return invoke(args).out;
  };
  ::unsetenv("FVKIT_SEED");
  const auto default_seed = with({});
  CHECK(meta_value(default_seed, "seed") == "1");
  ::setenv("FVKIT_SEED", "99", 1);
  const auto env = with({});
  CHECK(meta_value(env, "seed") == "99");
  CHECK(env == with({"--seed", "99"}));
  CHECK(meta_value(with({"--seed", "5"}), "seed") == "5");
  ::setenv("FVKIT_SEED", "nope", 1);
  CHECK(invoke(cmd).code == cli::kBadArguments);
  ::unsetenv("FVKIT_SEED");
}

TEST_CASE("simulate output") {
  const auto fv = invoke({"simulate", "fv", "--theta", "1", "--t", "1", "--steps", "100", "--seed", "3"});
  CHECK(fv.code == cli::kOk);
  CHECK(data_lines(fv.out).size() == 101);
  const auto mc = invoke({"simulate", "measure-chain", "--n", "5", "--steps", "10", "--observable", "0:0.25",
                          "--observable", "0.5:1"});
  CHECK(data_lines(mc.out)[0] == "step,obs1,obs2");
  CHECK(meta_value(mc.out, "n") == "5");
  const auto dar = invoke({"simulate", "dar1", "--base", "discrete:3", "--observable", "atoms:0,2", "--steps", "5"});
  for (const auto& line : data_lines(dar.out))
    if (line.rfind("step", 0) != 0) {
      const auto v = line.substr(line.find(',') + 1);
      CHECK((v == "0" || v == "1"));
    }
}

TEST_CASE("byte-identical reruns, across worker counts and output paths") {
  const std::vector<std::vector<std::string>> commands = {
      {"simulate", "dar1", "--theta", "1", "--steps", "1000", "--seed", "7"},
      {"simulate", "fv", "--theta", "1", "--t", "1", "--steps", "20", "--seed", "7"},
      {"pmf", "overlap", "--m", "6", "--n", "4", "--reps", "20000", "--seed", "7"},
      {"verify", "measures", "--reps", "500", "--theta", "1", "--seed", "7"},
  };
  for (const auto& cmd : commands) {
    const auto first = invoke(cmd);
    CHECK(first.code == cli::kOk);
    CHECK(invoke(cmd).out == first.out);
    auto parallel = cmd;
    parallel.insert(parallel.end(), {"--workers", "3"});
    CHECK(invoke(parallel).out == first.out);
    auto json = cmd;
    json.insert(json.end(), {"--format", "json"});
    const auto j = invoke(json);
    CHECK(nlohmann::json::parse(j.out)["metadata"]["seed"] == "7");
    CHECK(invoke(json).out == j.out);
  }

  const auto path = (std::filesystem::temp_directory_path() / "fvkit_cli_test.csv").string();
  const auto written = invoke({"pmf", "overlap", "--m", "2", "--n", "2", "--out", path});
  CHECK(written.out.empty());
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == invoke({"pmf", "overlap", "--m", "2", "--n", "2"}).out);
  std::filesystem::remove(path);
}
