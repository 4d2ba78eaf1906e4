#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "stochreg/errors.hpp"
#include "stochreg/harness.hpp"
#include "stochreg/image_io.hpp"
#include "stochreg/noise.hpp"

using namespace stochreg;
using namespace stochreg::harness;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("stochreg_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
  }

  /// Writes a config with output_dir pointing into the workspace.
  fs::path config(const std::string& body, const std::string& out = "out") const {
    return write("config.json", "{\"output_dir\": \"" + (dir / out).string() + "\", " + body + "}");
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_command(const std::string& command, const fs::path& config, std::string* out = nullptr,
                CommandOptions options = {}) {
  std::ostringstream o, e;
  const int code = dispatch(command, config, options, o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(R"({"problem": "linear-default", "methods": ["irsgd", "sgd"],
      "delta_rel": [0.1, 0.01], "seeds": [3, 4], "k_max": 20, "lambda_schedule": "constant:0.2"})");
  CHECK(c.methods.size() == 2);
  CHECK(c.delta_rel == std::vector<double>{0.1, 0.01});
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(*c.k_max == 20);
  CHECK(parse_config("{}").methods == std::vector<Method>{Method::Irsgd});

  CHECK_THROWS_AS(parse_config(R"({"colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"a": "ten"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"a": 0.5})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"tau": 1.0})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seeds": []})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"delta_rel": [-0.1]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"stopping_rule": "oracle"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"lambda_schedule": "inverse-fifth"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"method": "sgd", "methods": ["sgd"]})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
}

TEST_CASE("lambda schedules by name") {
  CHECK(parse_lambda_schedule("inverse-square")(4) == 1.0 / 16);
  CHECK(parse_lambda_schedule("inverse-cube")(2) == 1.0 / 8);
  CHECK(parse_lambda_schedule("inverse-square")(0) == 0.0);
  CHECK(parse_lambda_schedule("constant:0.3")(7) == 0.3);
  CHECK(parse_lambda_schedule("zero")(1) == 0.0);
}

TEST_CASE("validate: linear preset") {
  Workspace ws;
  std::string out;
  CHECK(run_command("validate", ws.config(R"("problem": "linear-default")"), &out) == 0);
  const auto report = nlohmann::json::parse(slurp(ws.dir / "out" / "constants_report.json"));
  CHECK(report["flags"]["lambda_summable"] == true);
  CHECK(report["flags"].contains("D_positive"));
  CHECK(report["D"].is_number());
  CHECK(report["lambda_sum"]["analytic_bound"].get<double>() ==
        doctest::Approx(1.6449340668482264));
}

TEST_CASE("validate: lambda_max = 0 mentions kappa") {
  Workspace ws;
  std::string out;
  CHECK(run_command("validate", ws.config(R"("lambda_max": 0)"), &out) == 0);
  CHECK(out.find("kappa can be set to zero") != std::string::npos);
}

TEST_CASE("validate: custom problem without rho") {
  Workspace ws;
  ws.write("obs.csv", "i,entry_index,value\n0,0,1\n1,0,2\n");
  ws.write("problem.json", R"({"type": "linear", "matrix": [[1, 0], [0, 1]], "observations": "obs.csv"})");
  std::string out;
  CHECK(run_command("validate", ws.config(R"("problem": "problem.json")"), &out) == 2);
  CHECK(out.find("rho") != std::string::npos);
  CHECK(run_command("validate", ws.config(R"("problem": "problem.json", "rho": 2.0)")) == 0);
}

TEST_CASE("custom linear problem runs") {
  Workspace ws;
  ws.write("obs.csv", "i,entry_index,value\n0,0,1\n1,0,2\n");
  ws.write("problem.json", R"({"type": "linear", "matrix": [[1, 0], [0, 1]], "observations": "obs.csv", "truth": [1, 2]})");
  CHECK(run_command("run", ws.config(R"("problem": "problem.json", "k_max": 50, "delta_rel": [0])")) == 0);
  const auto u = io::read_vector_csv(ws.dir / "out" / "recon_0_1.csv");
  CHECK(u.size() == 2);
  CHECK(run_command("run", ws.config(R"("problem": "missing.json")")) == 2);
}

TEST_CASE("trace CSV round trip") {
  Workspace ws;
  const auto cfg = load_config(ws.config(R"("k_max": 60, "delta_rel": [0.05], "seeds": [2])"));
  const Problem p = build_problem(cfg);
  const SingleRun r = execute(p, cfg, Method::Irsgd, 0.05, 2);
  const std::string text = trace_csv(r.trace);
  CHECK(text.rfind("k,i_k,omega_k,lambda_k,res_ik,res_sq_sum,psi,rel_err\n", 0) == 0);
  const auto back = parse_trace_csv(text);
  REQUIRE(back.size() == r.trace.records.size());
  bool equal = true;
  for (std::size_t k = 0; k < back.size(); ++k) {
    const auto& a = back[k];
    const auto& b = r.trace.records[k];
    equal = equal && a.k == b.k && a.i_k == b.i_k && a.omega_k == b.omega_k &&
            a.lambda_k == b.lambda_k && a.res_ik == b.res_ik && a.res_sq_sum == b.res_sq_sum &&
            a.psi == b.psi && a.rel_err == b.rel_err;
  }
  CHECK(equal);
  CHECK(trace_csv(RunTrace{.records = back}) == text);

  RunTrace full;
  TraceRecord rec;
  rec.all_equations = true;
  rec.omega_k = 0.5;
  full.records.push_back(rec);
  CHECK(parse_trace_csv(trace_csv(full))[0].all_equations);
}

TEST_CASE("run: artifacts and summary") {
  Workspace ws;
  std::string out;
  CHECK(run_command("run", ws.config(R"("k_max": 200, "delta_rel": [0.01], "seeds": [1])"), &out) == 0);
  const fs::path o = ws.dir / "out";
  CHECK(fs::exists(o / "trace_0.01_1.csv"));
  CHECK(fs::exists(o / "recon_0.01_1.csv"));
  const auto s = nlohmann::json::parse(slurp(o / "summary_0.01_1.json"));
  CHECK(s["quality"]["k_star"].get<std::size_t>() <= 200);
  CHECK(s["quality"]["E_at_k_star"].is_number());
  CHECK(s["quality"]["runtime_seconds"].is_null());
  CHECK(s["stop_reason"] == "cap");
  CHECK(line_count(o / "trace_0.01_1.csv") == 202);
}

TEST_CASE("run: classical discrepancy with exact data hits the cap") {
  Workspace ws;
  CHECK(run_command("run", ws.config(R"("k_max": 40, "delta_rel": [0], "stopping_rule": "classical-discrepancy")")) == 0);
  const auto s = nlohmann::json::parse(slurp(ws.dir / "out" / "summary_0_1.json"));
  CHECK(s["stop_reason"] == "cap");
  CHECK(s["stop_index"] == 40);
}

TEST_CASE("run: modified discrepancy needs benchmark data") {
  Workspace ws;
  ws.write("obs.csv", "i,entry_index,value\n0,0,1\n");
  ws.write("problem.json", R"({"type": "linear", "matrix": [[1]], "observations": "obs.csv"})");
  CHECK(run_command("run", ws.config(R"("problem": "problem.json", "rho": 1, "stopping_rule": "modified-discrepancy")")) == 2);
}

TEST_CASE("run: schlieren writes an image with quality metrics") {
  Workspace ws;
  CHECK(run_command("run", ws.config(R"("problem": "schlieren-default", "N": 16, "P": 6, "k_max": 10, "pgm_ascii": true)")) == 0);
  const fs::path o = ws.dir / "out";
  const auto img = io::read_pgm(o / "recon_0.01_1.pgm");
  CHECK(img.width == 16);
  const auto s = nlohmann::json::parse(slurp(o / "summary_0.01_1.json"));
  CHECK(s["quality"]["psnr_db"].is_number());
  CHECK(s["quality"]["ssim"].get<double>() <= 1.0);
  CHECK(s["quality"]["ssim"].get<double>() >= -1.0);
}

TEST_CASE("compare: undamped IRSGD and SGD give identical rows") {
  Workspace ws;
  CHECK(run_command("compare", ws.config(R"("methods": ["irsgd", "sgd"], "lambda_schedule": "zero",
      "k_max": 150, "delta_rel": [0.1, 0.01], "seeds": [1, 2])")) == 0);
  std::ifstream in(ws.dir / "out" / "comparison.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "method,delta_rel,seed,k_star,E_k_star,psi_k_star,stop_index,stop_reason");
  std::vector<std::string> irsgd, sgd;
  for (std::string line; std::getline(in, line);) {
    const auto comma = line.find(',');
    (line.substr(0, comma) == "irsgd" ? irsgd : sgd).push_back(line.substr(comma));
  }
  CHECK(irsgd.size() == 4);
  CHECK(irsgd == sgd);
  CHECK(fs::exists(ws.dir / "out" / "comparison_median.csv"));
  CHECK(run_command("compare", ws.config(R"("methods": ["irsgd"])")) == 2);
}

TEST_CASE("psi-curve: one file per level") {
  Workspace ws;
  CHECK(run_command("psi-curve", ws.config(R"("k_max": 30, "delta_rel": [0.1, 0.01, 0.001, 0.0001], "seeds": [1, 2])")) == 0);
  const fs::path o = ws.dir / "out";
  for (double d : {0.1, 0.01, 0.001, 0.0001}) {
    const fs::path f = o / ("psi_curve_" + delta_tag(d) + ".csv");
    REQUIRE(fs::exists(f));
    CHECK(line_count(f) == 31 + 1);
  }
  CHECK(line_count(o / "psi_markers.csv") == 1 + 8);
  CHECK(run_command("psi-curve", ws.config(R"("stopping_rule": "none")")) == 2);
}

TEST_CASE("psi-curve: exact data residual decays") {
  Workspace ws;
  CHECK(run_command("psi-curve", ws.config(R"("k_max": 400, "delta_rel": [0], "seeds": [1])")) == 0);
  std::ifstream in(ws.dir / "out" / "psi_curve_0.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> psi;
  while (std::getline(in, line)) psi.push_back(std::stod(line.substr(line.find(',') + 1)));
  REQUIRE(psi.size() == 401);
  // residual^2 = Psi / (k + a)
  CHECK(psi.back() / 500.0 < 1e-3 * psi.front() / 100.0);
}

TEST_CASE("identical runs give identical bytes") {
  Workspace ws;
  const auto cfg = ws.config(R"("k_max": 120, "delta_rel": [0.01], "seeds": [5])", "a");
  CHECK(run_command("run", cfg) == 0);
  const auto cfg2 = ws.config(R"("k_max": 120, "delta_rel": [0.01], "seeds": [5])", "b");
  CHECK(run_command("run", cfg2) == 0);
  for (const char* f : {"trace_0.01_5.csv", "summary_0.01_5.json", "recon_0.01_5.csv"})
    CHECK(slurp(ws.dir / "a" / f) == slurp(ws.dir / "b" / f));
}

TEST_CASE("divergence exits with 3 and keeps the trace") {
  Workspace ws;
  CHECK(run_command("run", ws.config(R"("omega": 5000, "k_max": 500)")) == 3);
  const fs::path o = ws.dir / "out";
  CHECK(fs::exists(o / "trace_0.01_1.csv"));
  const auto s = nlohmann::json::parse(slurp(o / "summary_0.01_1.json"));
  CHECK(s["stop_reason"] == "divergence");
}

TEST_CASE("overrides") {
  Workspace ws;
  const auto path = ws.config(R"("k_max": 500, "seeds": [1, 2, 3])");
  CommandOptions options;
  options.seed_override = 9;
  options.k_max_override = 15;
  CHECK(run_command("run", path, nullptr, options) == 0);
  CHECK(fs::exists(ws.dir / "out" / "trace_0.01_9.csv"));
  CHECK_FALSE(fs::exists(ws.dir / "out" / "trace_0.01_1.csv"));
  CHECK(line_count(ws.dir / "out" / "trace_0.01_9.csv") == 17);

  const fs::path redirected = ws.dir / "env_out";
  ::setenv("STOCHREG_OUTPUT", redirected.c_str(), 1);
  CHECK(run_command("run", path, nullptr, options) == 0);
  ::unsetenv("STOCHREG_OUTPUT");
  CHECK(fs::exists(redirected / "trace_0.01_9.csv"));
}

TEST_CASE("command-line front end") {
  const char* cli = std::getenv("STOCHREG_CLI");
  if (cli == nullptr) return;
  Workspace ws;
  const auto path = ws.config(R"("k_max": 10)");
  const auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  const std::string exe = std::string("\"") + cli + "\"";
  CHECK(status(exe + " run --config " + path.string() + " --seed-override 4 --k-max 5") == 0);
  CHECK(fs::exists(ws.dir / "out" / "trace_0.01_4.csv"));
  CHECK(status(exe + " run") == 2);
  CHECK(status(exe + " frobnicate --config " + path.string()) == 2);
  CHECK(status(exe + " validate --config " + (ws.dir / "nope.json").string()) == 2);
  ws.write("bad.json", R"({"colour": 3})");
  CHECK(status(exe + " validate --config " + (ws.dir / "bad.json").string()) == 2);
}
