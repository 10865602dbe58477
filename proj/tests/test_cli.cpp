#include <doctest.h>

#include <filesystem>
#include <json.hpp>
#include <regex>
#include <sstream>
#include <stack>

#include "tightbound/cli.hpp"
#include "tightbound/report_io.hpp"
#include "tightbound/synthetic.hpp"

using namespace tightbound;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "tightbound_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Tags must nest and close; attribute values are quoted.
bool well_formed_xml(const std::string& text) {
  std::stack<std::string> open;
  static const std::regex tag(R"(<(/?)([A-Za-z_][\w:.-]*)((?:\s+[\w:.-]+="[^"<]*")*)\s*(/?)>)");
  std::size_t pos = text.find("?>");
  if (text.rfind("<?xml", 0) != 0 || pos == std::string::npos) return false;
  pos += 2;
  while (true) {
    const auto lt = text.find('<', pos);
    if (lt == std::string::npos) break;
    std::smatch m;
    const std::string rest = text.substr(lt, text.find('>', lt) - lt + 1);
    if (!std::regex_match(rest, m, tag)) return false;
    if (m[1].length() > 0) {
      if (open.empty() || open.top() != m[2].str()) return false;
      open.pop();
    } else if (m[4].length() == 0) {
      open.push(m[2].str());
    }
    pos = lt + rest.size();
  }
  return open.empty();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

std::vector<OuterMetrics> sample_metrics(std::size_t T) {
  std::vector<OuterMetrics> out;
  for (std::size_t t = 1; t <= T; ++t)
    out.push_back({t, 0.7 - 0.01 * static_cast<double>(t), 0.3, 0.71, 0.31 + 1e-11 * static_cast<double>(t)});
  return out;
}

}  // namespace

TEST_CASE("sha256 of a known vector") {
  CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(cli::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("metrics csv format") {
  CHECK(metrics_csv({}) == "outer_t,train_nll,train_err,valid_nll,valid_err\n");
  const auto m = sample_metrics(3);
  const auto text = metrics_csv(m);
  CHECK(count(text, "\n") == 4);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.find("1,0.69,0.3,0.71,0.31\n") != std::string::npos);
  const auto back = parse_metrics_csv(text);
  REQUIRE(back.size() == 3);
  CHECK(back[2].train_nll == doctest::Approx(0.67));
  CHECK(format_real(1.0 / 3.0) == "0.3333333333");
  CHECK(format_real(std::nan("")) == "nan");
  CHECK(format_real(1e-12) == "1e-12");
  CHECK_THROWS(parse_metrics_csv("outer_t,train_nll,train_err,valid_nll,valid_err\n1,x,0,0,0\n"));
  CHECK_THROWS(parse_metrics_csv("wrong header\n"));
}

TEST_CASE("other csv emitters") {
  const std::vector<RocPoint> roc{{0, 0, "endpoint"}, {0.25, 0.5, "0.3"}};
  CHECK(roc_csv(roc) == "operating_tag,fpr,tpr\nendpoint,0,0\n0.3,0.25,0.5\n");
  const std::vector<ConstrainedStep> steps{{1, 0.5, 0.2, 0.1}};
  CHECK(constrained_csv(steps) == "outer_t,dual,train_fpr_prob,train_fpr_thresh\n1,0.5,0.2,0.1\n");
  const std::vector<TracePoint> trace{{10, 0.5}};
  CHECK(trace_csv(trace) == "updates_done,objective\n10,0.5\n");

  EvalReport r;
  r.outer_iterations = 10;
  r.inner_updates = 100;
  r.per_fold = {{0, 0.1, 2, 0.2, 0.30}, {1, 0.1, 2, 0.25, 0.32}};
  summarize(r);
  const auto csv = eval_report_csv(r);
  CHECK(csv.rfind("fold,best_lambda,best_outer_t,valid_error,test_error,sigma,ci_halfwidth\n", 0) == 0);
  CHECK(csv.find("\nsummary,") != std::string::npos);
  const std::vector<EvalReport> reports{r};
  const auto table = eval_table(reports);
  CHECK(table.find("31.00 +- 4.24") != std::string::npos);
}

TEST_CASE("curves svg") {
  const std::vector<CurveSeries> one{{"T=1", sample_metrics(1)}};
  const auto svg = render_curves_svg(one);
  CHECK(well_formed_xml(svg));
  CHECK(count(svg, "<polyline") == 4);

  const auto dir = scratch("svg");
  std::vector<fs::path> paths;
  for (int T : {1, 10, 100, 1000}) {
    paths.push_back(dir / ("T" + std::to_string(T) + ".csv"));
    write_text_file(paths.back(), metrics_csv(sample_metrics(static_cast<std::size_t>(std::min(T, 50)))));
  }
  const auto four = render_curves_svg(paths);
  CHECK(well_formed_xml(four));
  CHECK(count(four, "<polyline") == 16);
  CHECK(four.find(">T1000<") != std::string::npos);
  CHECK(four.find("negative log-likelihood") != std::string::npos);
  CHECK(four.find("classification error") != std::string::npos);

  write_text_file(dir / "bad.csv", "not,a,metrics,file\n");
  const std::vector<fs::path> bad{dir / "bad.csv"};
  CHECK_THROWS(render_curves_svg(bad));
  CHECK_FALSE(well_formed_xml("<?xml version=\"1.0\"?><a><b></a>"));
}

TEST_CASE("train writes metrics, model and manifest") {
  const auto dir = scratch("train");
  const auto data = dir / "d.libsvm";
  write_text_file(data, to_libsvm(make_synthetic(SyntheticKind::underfit2d, 400, 1)));
  const auto before = read_text_file(data);
  const auto out = dir / "run1";
  const auto r = run_cli({"train", "--data", data.string(), "--T", "10", "--Z", "100", "--lambda", "1e-4", "--seed",
                          "42", "--out", out.string()});
  REQUIRE(r.code == cli::kSuccess);
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "model.txt"));
  CHECK(fs::exists(out / "manifest"));
  CHECK(read_text_file(data) == before);
  CHECK(count(read_text_file(out / "metrics.csv"), "\n") == 11);
  const auto manifest = nlohmann::json::parse(read_text_file(out / "manifest"));
  CHECK(manifest["status"] == "complete");
  CHECK(manifest["command"] == "train");
  CHECK(manifest["config"]["T"] == 10);
  CHECK(manifest["files"]["metrics.csv"] == cli::sha256_hex(read_text_file(out / "metrics.csv")));
  CHECK(fs::exists(out / "curves.svg"));
  CHECK_FALSE(fs::exists(out / "trace.csv"));
}

TEST_CASE("usage errors exit 1 with usage text") {
  auto r = run_cli({"train", "--T", "3", "--out", scratch("usage").string()});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("--data") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run_cli({}).code == cli::kUsageError);
  CHECK(run_cli({"frobnicate"}).code == cli::kUsageError);
  CHECK(run_cli({"train", "--data", "synthetic:separable:50", "--out", scratch("u2").string(), "--batch", "0"}).code ==
        cli::kUsageError);
  CHECK(run_cli({"cv", "--data", "synthetic:separable:50", "--out", scratch("u3").string(), "--budget", "abc"}).code ==
        cli::kUsageError);
  CHECK(run_cli({"--help"}).code == cli::kSuccess);
}

TEST_CASE("data errors exit 2") {
  const auto dir = scratch("dataerr");
  auto r = run_cli({"train", "--data", (dir / "missing.libsvm").string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kDataError);
  write_text_file(dir / "bad.libsvm", "1 1:0.5\n0 2:zz\n");
  r = run_cli({"train", "--data", (dir / "bad.libsvm").string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kDataError);
  CHECK(r.err.find(":2:") != std::string::npos);
  write_text_file(dir / "bad.csv", "1,2\n3\n");
  r = run_cli({"train", "--data", (dir / "bad.csv").string(), "--format", "csv", "--out", (dir / "o").string()});
  CHECK(r.code == cli::kDataError);
}

TEST_CASE("numerical failures exit 3") {
  const auto dir = scratch("numerr");
  write_text_file(dir / "big.libsvm", "1 1:1e150\n0 1:-1e150\n1 1:3e150\n");
  const auto r = run_cli({"train", "--data", (dir / "big.libsvm").string(), "--Z", "50", "--step", "1e10", "--out",
                          (dir / "o").string()});
  CHECK(r.code == cli::kNumericalError);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("cv holds the budget fixed across T") {
  const auto dir = scratch("cv");
  const auto r = run_cli({"cv", "--data", "synthetic:underfit2d:600", "--folds", "3", "--T-grid", "1,10,100",
                          "--budget", "1e3", "--lambda-grid", "1e-4,1e-2", "--out", dir.string()});
  REQUIRE(r.code == cli::kSuccess);
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest"));
  const auto& per_t = manifest["notes"]["per_T"];
  REQUIRE(per_t.size() == 3);
  for (const auto& entry : per_t) {
    CHECK(entry["T"].get<std::size_t>() * entry["Z"].get<std::size_t>() == 1000);
    CHECK(entry["models_trained"] == 6);
  }
  for (int T : {1, 10, 100}) {
    CHECK(fs::exists(dir / ("report_T" + std::to_string(T) + ".csv")));
    CHECK(fs::exists(dir / ("metrics_T" + std::to_string(T) + ".csv")));
  }
  CHECK(count(read_text_file(dir / "table.txt"), "\n") >= 4);
  CHECK(count(read_text_file(dir / "curves.svg"), "<polyline") == 12);
}

TEST_CASE("every command reruns byte-identically") {
  const std::vector<std::vector<std::string>> commands{
      {"train", "--data", "synthetic:bach_style:300", "--T", "3", "--Z", "100", "--trace", "--holdout", "0.2"},
      {"cv", "--data", "synthetic:underfit2d:300", "--folds", "2", "--T-grid", "1,2", "--budget", "200",
       "--lambda-grid", "1e-3", "--jobs", "2"},
      {"roc", "--data", "synthetic:bach_style:300", "--T", "2", "--Z", "100", "--c-grid", "0.3,0.7", "--splits",
       "2"},
      {"constrained", "--data", "synthetic:bach_style:300", "--T", "3", "--Z", "100", "--cfp", "0.2"},
      {"undecided", "--data", "synthetic:separable:200", "--T", "3", "--Z", "100", "--rh", "0.8"},
      {"bench", "--kind", "underfit2d", "--n", "300", "--folds", "2", "--T-grid", "1,2", "--budget", "200",
       "--lambda-grid", "1e-3"},
  };
  for (const auto& base : commands) {
    CAPTURE(base[0]);
    std::string manifests[2];
    for (int rep = 0; rep < 2; ++rep) {
      // the same output path both times, so the manifests match exactly
      const auto dir = scratch("determinism_" + base[0]);
      auto args = base;
      args.push_back("--out");
      args.push_back(dir.string());
      const auto r = run_cli(args);
      REQUIRE(r.code == cli::kSuccess);
      manifests[rep] = read_text_file(dir / "manifest");
      const auto files = nlohmann::json::parse(manifests[rep])["files"];
      CHECK(files.size() >= 2);
      for (const auto& [name, digest] : files.items()) CHECK(cli::sha256_hex(read_text_file(dir / name)) == digest);
    }
    CHECK(manifests[0] == manifests[1]);
  }
}
