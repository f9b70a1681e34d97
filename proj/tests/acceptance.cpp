// Acceptance run: one PASS/FAIL line per criterion. The exit status is 0
// when the set of failing criteria equals the --expect-fail set, so known
// shortfalls stay visible without breaking the build.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "indeltree/lemmas.hpp"
#include "indeltree/report.hpp"

using namespace indeltree;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  json evidence;
};

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Larger instance where the 200-site anchors separate, so the conditional
// checks see trials with a binding good event.
harness::ExperimentSpec supplementary_spec(const lemmas::Options& opt) {
  harness::ExperimentSpec s;
  s.name = "supplementary";
  s.seed = 7;
  s.trials = 10;
  s.threads = opt.threads;
  harness::CellSpec c;
  c.d = 5;
  c.H = 2;
  c.k = 100000;
  c.p_s = 0.05;
  c.p_id = 1e-6;
  c.beta = 0.02;
  c.ell = 250;
  c.a = 200;
  s.cells.push_back(c);
  return s;
}

Outcome from_verdict(const json& v, std::string detail) {
  return {v.at("pass").get<bool>(), std::move(detail), v};
}

Outcome conditional(const char* which, const json& desk, const json& supp) {
  const auto count = [&](const json& v, const char* ev, const char* field) {
    return v.at(ev).at(field).get<long long>();
  };
  const long long trials = count(desk, "given_E", "trials") + count(desk, "given_E_prime", "trials") +
                           count(supp, "given_E", "trials") + count(supp, "given_E_prime", "trials");
  const bool pass = desk.at("pass").get<bool>() && supp.at("pass").get<bool>() && trials > 0;
  std::ostringstream d;
  const char* unit = std::string(which) == "alignment" ? "shift_checks" : "sites";
  d << "desk E/E' trials " << count(desk, "given_E", "trials") << "/" << count(desk, "given_E_prime", "trials")
    << ", violations " << count(desk, "given_E", "violations") << "/" << count(desk, "given_E_prime", "violations")
    << "; supplementary E/E' trials " << count(supp, "given_E", "trials") << "/"
    << count(supp, "given_E_prime", "trials") << " (" << count(supp, "given_E_prime", unit) << " "
    << unit << "), violations " << count(supp, "given_E", "violations") << "/"
    << count(supp, "given_E_prime", "violations");
  return {pass, d.str(), {{"desk", desk}, {"supplementary", supp}}};
}

Outcome reproducibility(const lemmas::Options& opt) {
  const auto dir = std::filesystem::temp_directory_path() / ("indeltree_acceptance_" + std::to_string(opt.seed));
  std::filesystem::create_directories(dir);
  lemmas::DeskInstance small;
  small.trials = 24;
  const unsigned counts[2] = {1, std::max(3u, opt.threads)};
  std::string reports[2], verdicts[2];
  for (int i = 0; i < 2; ++i) {
    lemmas::Options o = opt;
    o.threads = counts[i];
    const auto spec = lemmas::desk_spec(small, o);
    const auto prefix = (dir / ("desk_t" + std::to_string(counts[i]))).string();
    harness::emit_report(spec, harness::run_experiment(spec), prefix);
    reports[i] = slurp(prefix + ".csv") + slurp(prefix + ".json");
    o.trials = 2000;
    verdicts[i] = report::dump(lemmas::run({"majority", "bias"}, o));
  }
  std::filesystem::remove_all(dir);
  lemmas::Options o = opt;
  o.threads = counts[1];
  o.trials = 2000;
  const bool same = reports[0] == reports[1] && verdicts[0] == verdicts[1];
  const bool rerun = report::dump(lemmas::run({"majority", "bias"}, o)) == verdicts[1];
  return {same && rerun,
          "desk CSV+JSON and majority/bias verdicts at threads " + std::to_string(counts[0]) + " vs " +
              std::to_string(counts[1]) + (same ? ": identical" : ": differ") +
              (rerun ? "; rerun identical" : "; rerun differs"),
          {{"report_bytes", reports[0].size()}, {"identical", same}, {"rerun_identical", rerun}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the indel tree reconstruction library"};
  lemmas::Options opt;
  opt.threads = std::max(1u, std::thread::hardware_concurrency());
  std::string expect_fail, out;
  app.add_option("--seed", opt.seed, "Master seed");
  app.add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--expect-fail", expect_fail, "Comma-separated criteria known to fail");
  app.add_option("--out", out, "Write the evidence bundle to this JSON file");
  CLI11_PARSE(app, argc, argv);

  std::set<int> expected;
  {
    std::stringstream ss(expect_fail);
    for (std::string tok; std::getline(ss, tok, ',');)
      if (!tok.empty()) expected.insert(std::stoi(tok));
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::map<int, Outcome> results;
  auto record = [&](int id, Outcome o) {
    std::cout << "criterion " << (id < 10 ? " " : "") << id << ": " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.detail << std::endl;
    results[id] = std::move(o);
  };

  // 1
  {
    const json v = lemmas::verify_identity(opt);
    std::string d = "d=3 H=3 zero rates";
    for (const auto& c : v["cases"])
      d += ", k=" + std::to_string(c["k"].get<std::size_t>()) + (c["pass"].get<bool>() ? " exact" : " mismatch");
    record(1, from_verdict(v, d));
  }
  // 2
  {
    const json v = lemmas::verify_substitution({}, opt);
    std::string d = "d=9 error by H:";
    for (const auto& r : v["heights"])
      d += " H=" + std::to_string(r["H"].get<int>()) + " " + fmt(r["error"].get<double>()) + " (root fails " +
           std::to_string(r["root_failures"].get<std::size_t>()) + ", adversarial " +
           fmt(r["adversarial_error"].get<double>()) + ", plain majority " +
           fmt(r["plain_majority_error"].get<double>()) + ")";
    d += "; target <= " + fmt(v["target"].get<double>());
    record(2, from_verdict(v, d));
  }
  // 3
  {
    const json v = lemmas::verify_majority(opt);
    double worst = 0;
    for (const auto& c : v["cases"])
      worst = std::max(worst, std::abs(c["estimate"].get<double>() - c["exact"].get<double>()) / c["sigma"].get<double>());
    record(3, from_verdict(v, "9 (d, p_s) cases, 1e5 draws each, worst deviation " + fmt(worst, 2) + " sigma"));
  }

  // Desk instance shared by 4, 5, 7, 8, 10, 11.
  const auto desk = lemmas::run_desk({}, opt);
  if (desk.status != "ok") {
    std::cerr << "desk instance could not run: " << desk.status << " " << desk.error << "\n";
    return 2;
  }
  // 4
  {
    const json v = lemmas::evaluate_radioactivity(desk);
    record(4, from_verdict(v, "rate " + fmt(v["estimate"].get<double>()) + " over " +
                                  std::to_string(v["samples"].get<std::size_t>()) + " nodes, Wilson upper " +
                                  fmt(v["ci"]["upper"].get<double>()) + " vs alpha " +
                                  fmt(v["target"].get<double>(), 2)));
  }
  // 5
  {
    const json v = lemmas::evaluate_stable(desk);
    record(5, from_verdict(v, "stable subtree in " + fmt(v["estimate"].get<double>()) + " of " +
                                  std::to_string(v["samples"].get<std::size_t>()) + " trials vs bound-3sigma " +
                                  fmt(v["target"].get<double>())));
  }
  // 6
  {
    const json v = lemmas::verify_anchors({}, opt);
    const auto& t = v["true_windows"];
    const auto& r = v["reconstructed_windows"];
    record(6, from_verdict(v, "true windows " + std::to_string(t["separated"].get<std::size_t>()) + "/" +
                                  std::to_string(t["triples"].get<std::size_t>()) + ", reconstructed " +
                                  std::to_string(r["separated"].get<std::size_t>()) + "/" +
                                  std::to_string(r["triples"].get<std::size_t>()) + " separated at gamma " +
                                  fmt(v["instance"]["gamma"].get<double>())));
  }
  // 7, 8
  const auto supp = harness::run_cell(supplementary_spec(opt), 0);
  const json desk_cond = lemmas::evaluate_alignment_and_domination(desk);
  const json supp_cond = lemmas::evaluate_alignment_and_domination(supp);
  record(7, conditional("alignment", desk_cond["alignment"], supp_cond["alignment"]));
  record(8, conditional("domination", desk_cond["domination"], supp_cond["domination"]));
  // 9
  {
    const json v = lemmas::verify_bias(opt);
    record(9, from_verdict(v, std::to_string(v["fixtures"].get<std::size_t>()) + " fixtures, m=" +
                                  std::to_string(v["m"].get<std::size_t>()) + ", violations " +
                                  std::to_string(v["violations"].get<std::size_t>()) + ", min slack " +
                                  fmt(v["min_slack"].get<double>())));
  }
  // 10
  {
    const json v = lemmas::evaluate_theorem(desk);
    std::size_t failed = 0;
    for (const auto& r : desk.records) failed += r.root_failed;
    double supp_agree = 0;
    for (const auto& r : supp.records) supp_agree += r.agreement;
    supp_agree /= static_cast<double>(supp.records.size());
    Outcome o = from_verdict(
        v, "length exact " + std::to_string(v["length_exact"].get<std::size_t>()) + "/" +
               std::to_string(v["samples"].get<std::size_t>()) + ", agreement given S " +
               fmt(v["agreement_mean_given_S"].get<double>()) + " (target > " + fmt(v["target_given_S"].get<double>()) +
               "), unconditional " + fmt(v["agreement_mean"].get<double>()) + " (target > 0.85), root aborts " +
               std::to_string(failed));
    o.evidence["supplementary_agreement_mean"] = supp_agree;
    record(10, std::move(o));
    std::cout << "     info: supplementary instance (k=1e5, a=200) agreement " << fmt(supp_agree) << " over "
              << supp.records.size() << " trials" << std::endl;
  }
  // 11
  {
    const json v = lemmas::evaluate_length(desk);
    record(11, from_verdict(v, "event L in " + fmt(v["estimate"].get<double>()) + " of " +
                                   std::to_string(v["samples"].get<std::size_t>()) + " trials"));
  }
  // 12
  record(12, reproducibility(opt));

  std::set<int> failing;
  for (const auto& [id, o] : results)
    if (!o.pass) failing.insert(id);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "summary: " << (results.size() - failing.size()) << "/" << results.size() << " criteria pass";
  if (!failing.empty()) {
    std::cout << "; failing:";
    for (int id : failing) std::cout << " " << id;
  }
  std::cout << "; expected failures:";
  if (expected.empty()) std::cout << " none";
  for (int id : expected) std::cout << " " << id;
  std::cout << "; " << fmt(secs, 1) << " s" << std::endl;

  if (!out.empty()) {
    json bundle = {{"schema_version", report::kSchemaVersion}, {"seed", opt.seed}, {"criteria", json::object()}};
    for (const auto& [id, o] : results)
      bundle["criteria"][std::to_string(id)] = {{"pass", o.pass}, {"detail", o.detail}, {"evidence", o.evidence}};
    std::ofstream f(out, std::ios::binary);
    f << report::dump(bundle);
    if (!f) {
      std::cerr << "cannot write " << out << "\n";
      return 2;
    }
  }
  if (failing != expected) {
    std::cout << "result: failing set differs from the expected set" << std::endl;
    return 1;
  }
  return 0;
}
