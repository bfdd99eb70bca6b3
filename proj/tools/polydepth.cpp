#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "polydepth/polydepth.h"

namespace {

constexpr int kOk = 0, kVerifyFailed = 1, kUsage = 2, kRuntime = 3;

struct Failure {
  int code;
  std::string message;
};

int exit_code(pd_status s) {
  switch (s) {
    case PD_OK: return kOk;
    case PD_VERIFICATION_FAILED: return kVerifyFailed;
    case PD_INVALID_ARGUMENT:
    case PD_PARSE: return kUsage;
    default: return kRuntime;
  }
}

void check(pd_status s) {
  if (s != PD_OK) throw Failure{exit_code(s), std::string(pd_status_name(s)) + ": " + pd_last_error()};
}

struct CString {
  char* p = nullptr;
  ~CString() { pd_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

using Poly = std::unique_ptr<pd_polynomial, decltype(&pd_polynomial_free)>;
using Net = std::unique_ptr<pd_network, decltype(&pd_network_free)>;

Poly parse_poly(const std::string& text, size_t n) {
  pd_polynomial* p = nullptr;
  check(pd_polynomial_parse(text.c_str(), n, &p));
  return Poly(p, pd_polynomial_free);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kRuntime, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Net load_net(const std::string& path) {
  pd_network* n = nullptr;
  check(pd_network_from_json(read_file(path).c_str(), &n));
  return Net(n, pd_network_free);
}

// Files are staged next to their target and renamed into place only after
// the command has succeeded.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> staged;  // (temp, final)

  void add(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp" + std::to_string(::getpid());
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) {
      std::remove(tmp.c_str());
      throw Failure{kRuntime, "cannot write " + path};
    }
    staged.emplace_back(tmp, path);
  }
  void commit() {
    for (const auto& [tmp, path] : staged) {
      std::error_code ec;
      std::filesystem::rename(tmp, path, ec);
      if (ec) throw Failure{kRuntime, "cannot move " + tmp + " to " + path + ": " + ec.message()};
      std::cerr << "wrote " << path << '\n';
    }
    staged.clear();
  }
  ~Artifacts() {
    for (const auto& s : staged) std::remove(s.first.c_str());
  }
};

std::vector<uint32_t> parse_r(const std::string& text) {
  std::vector<uint32_t> r;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      r.push_back(static_cast<uint32_t>(v));
    } catch (const std::exception&) {
      throw Failure{kUsage, "bad exponent list '" + text + "'"};
    }
  }
  if (r.empty()) throw Failure{kUsage, "empty exponent list"};
  return r;
}

std::string cert_path_for(const std::string& out) {
  const std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + ".cert.json")).string();
}

void emit(Artifacts& files, const std::string& out, const std::string& text) {
  if (out.empty())
    std::cout << text;
  else
    files.add(out, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth/width trade-offs for polynomial approximation by neural networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pd_version());

  // construct
  auto* construct = app.add_subcommand("construct", "Build a network that Taylor-approximates a polynomial");
  std::string c_target, c_mode = "shallow", c_act = "exp", c_out, c_cert;
  std::size_t c_k = 0, c_n = 0;
  construct->add_option("--target", c_target, "Polynomial, e.g. \"x1*x2*x3\"")->required();
  construct->add_option("--mode", c_mode, "shallow | deep | tree | vandermonde")->capture_default_str();
  construct->add_option("--activation", c_act, "exp | sigmoid | tanh | softplus")->capture_default_str();
  construct->add_option("--k", c_k, "Tree depth for --mode tree (0: rule of thumb)")->capture_default_str();
  construct->add_option("--n", c_n, "Variable count (0: largest index used)")->capture_default_str();
  construct->add_option("--out", c_out, "Network JSON path")->required();
  construct->add_option("--certificate", c_cert, "Certificate path (default: <out stem>.cert.json)");

  // verify
  auto* verify = app.add_subcommand("verify", "Certify a network against a polynomial");
  std::string v_net, v_target, v_out, v_cert;
  double v_eps = 0, v_radius = 1, v_tol = 1e-9;
  std::size_t v_samples = 100000;
  uint64_t v_seed = 0;
  verify->add_option("--network", v_net, "Network JSON")->required();
  verify->add_option("--target", v_target, "Polynomial")->required();
  verify->add_option("--epsilon", v_eps, "Uniform error bound; 0 checks the Taylor polynomial only")
      ->capture_default_str();
  verify->add_option("--radius", v_radius, "Box half-width R")->capture_default_str();
  verify->add_option("--samples", v_samples, "Low-discrepancy sample count")->capture_default_str();
  verify->add_option("--seed", v_seed, "Sampling seed")->capture_default_str();
  verify->add_option("--tolerance", v_tol, "Taylor coefficient tolerance")->capture_default_str();
  verify->add_option("--out", v_out, "Write the rescaled network here (with --epsilon)");
  verify->add_option("--certificate", v_cert, "Certificate path (default: stdout)");

  // rank
  auto* rank = app.add_subcommand("rank", "Numerical rank of the derivative matrix of a shallow network");
  std::string rk_net, rk_r, rk_out;
  rank->add_option("--network", rk_net, "Network JSON (one hidden layer)")->required();
  rank->add_option("--r", rk_r, "Exponents, e.g. 2,1,3")->required();
  rank->add_option("--out", rk_out, "Report path (default: stdout)");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Neuron-count bounds for a monomial or sparse polynomial");
  std::string b_r, b_target, b_out;
  std::size_t b_tree_k = 3;
  auto* b_r_opt = bounds->add_option("--r", b_r, "Monomial exponents, e.g. 2,1,3");
  bounds->add_option("--target", b_target, "Sparse polynomial")->excludes(b_r_opt);
  bounds->add_option("--max-tree-k", b_tree_k, "Largest tree depth reported")->capture_default_str();
  bounds->add_option("--out", b_out, "JSON path (default: stdout)");

  // plan
  auto* plan = app.add_subcommand("plan", "Optimal group sizes for a k-layer product tree");
  double p_n = 0;
  std::size_t p_k = 1;
  bool p_csv = false;
  std::string p_out;
  plan->add_option("--n", p_n, "Number of factors")->required();
  plan->add_option("--k", p_k, "Hidden layers")->capture_default_str();
  plan->add_flag("--emit-csv", p_csv, "CSV rows n,k,i,b_i,b_i_over_n^(1/k) instead of JSON");
  plan->add_option("--out", p_out, "Output path (default: stdout)");

  // plan-sweep
  auto* sweep = app.add_subcommand("plan-sweep", "Optimal group sizes over a grid of n");
  std::vector<std::size_t> s_k{1, 2, 3};
  std::string s_grid = "log:10..1e6", s_out;
  bool s_csv = true;
  sweep->add_option("--k", s_k, "Depths")->delimiter(',')->capture_default_str();
  sweep->add_option("--n-grid", s_grid, "log:A..B[:count] or a comma list")->capture_default_str();
  sweep->add_flag("--emit-csv", s_csv, "CSV output (the only format)");
  sweep->add_option("--out", s_out, "CSV path (default: stdout)");

  // experiment
  auto* exper = app.add_subcommand("experiment", "Train MLPs on the product of n inputs over a depth x width grid");
  pd_train_config defaults;
  pd_train_config_default(&defaults);
  std::size_t e_n = defaults.n, e_steps = defaults.steps, e_batch = defaults.batch_size,
              e_eval = defaults.eval_samples, e_threads = 0;
  std::vector<std::size_t> e_depths{1, 2, 3}, e_widths{5, 10, 20, 40};
  std::vector<uint64_t> e_seeds{0, 1, 2};
  std::string e_act = "tanh", e_out, e_svg;
  bool e_long = false, e_timing = false;
  exper->add_option("--n", e_n, "Input count")->capture_default_str();
  exper->add_option("--depths", e_depths, "Hidden layer counts")->delimiter(',')->capture_default_str();
  exper->add_option("--widths", e_widths, "Hidden widths")->delimiter(',')->capture_default_str();
  exper->add_option("--seeds", e_seeds, "Seeds")->delimiter(',')->capture_default_str();
  exper->add_option("--steps", e_steps, "AdaDelta steps per run")->capture_default_str();
  exper->add_option("--batch-size", e_batch, "Mini-batch size")->capture_default_str();
  exper->add_option("--eval-samples", e_eval, "Held-out points per run")->capture_default_str();
  exper->add_option("--activation", e_act, "tanh | relu")->capture_default_str();
  exper->add_option("--threads", e_threads, "Parallel runs (0: POLYDEPTH_THREADS or all cores)")
      ->capture_default_str();
  exper->add_flag("--long-running", e_long, "Allow n > 8 (hours at n = 20)");
  exper->add_flag("--timing", e_timing, "Record wall-clock seconds (otherwise 0, for byte-stable CSV)");
  exper->add_option("--out", e_out, "CSV path (default: stdout)");
  exper->add_option("--svg", e_svg, "Heat map path");

  // selftest
  auto* self = app.add_subcommand("selftest", "Run the acceptance criteria");
  std::vector<int> t_criteria;
  std::size_t t_threads = 0;
  std::string t_artifacts;
  self->add_option("--criteria", t_criteria, "Subset to run, e.g. 1,2,8 (default: all)")->delimiter(',');
  self->add_option("--threads", t_threads, "Grid threads for the training criterion")->capture_default_str();
  self->add_option("--artifacts", t_artifacts, "Directory for per-criterion artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    Artifacts files;
    int rc = kOk;

    if (*construct) {
      auto p = parse_poly(c_target, c_n);
      pd_network* raw = nullptr;
      check(pd_construct(p.get(), c_act.c_str(), c_mode.c_str(), c_k, &raw));
      Net net(raw, pd_network_free);
      double dev = 0;
      CString cert, json;
      check(pd_certify_taylor(net.get(), p.get(), &dev, &cert.p));
      check(pd_network_to_json(net.get(), &json.p));
      pd_network_info info{};
      check(pd_network_info_get(net.get(), &info));
      std::printf("mode=%s activation=%s neurons=%zu depth=%zu padding=%zu max_coeff_deviation=%.3e\n",
                  c_mode.c_str(), c_act.c_str(), info.neurons, info.depth, info.padding_neurons, dev);
      if (dev > 1e-9) throw Failure{kVerifyFailed, "Taylor coefficients deviate by " + std::to_string(dev)};
      files.add(c_out, json.str());
      files.add(c_cert.empty() ? cert_path_for(c_out) : c_cert, cert.str());
    } else if (*verify) {
      auto net = load_net(v_net);
      pd_network_info info{};
      check(pd_network_info_get(net.get(), &info));
      auto p = parse_poly(v_target, info.inputs);
      CString cert;
      if (v_eps > 0) {
        pd_network* raw = nullptr;
        const pd_status s = pd_epsilonize(net.get(), p.get(), v_eps, v_radius, v_samples, v_seed, &raw, &cert.p);
        check(s);
        Net scaled(raw, pd_network_free);
        if (!v_out.empty()) {
          CString json;
          check(pd_network_to_json(scaled.get(), &json.p));
          files.add(v_out, json.str());
        }
      } else {
        double dev = 0;
        check(pd_certify_taylor(net.get(), p.get(), &dev, &cert.p));
        if (dev > v_tol) rc = kVerifyFailed;
      }
      if (rc == kOk) emit(files, v_cert, cert.str());
      else std::cout << cert.str();
    } else if (*rank) {
      auto net = load_net(rk_net);
      const auto r = parse_r(rk_r);
      CString rep;
      check(pd_derivative_rank(net.get(), r.data(), r.size(), &rep.p));
      if (rep.str().find("\"full_row_rank\": true") == std::string::npos) rc = kVerifyFailed;
      if (rc == kOk) emit(files, rk_out, rep.str());
      else std::cout << rep.str();
    } else if (*bounds) {
      CString json;
      if (!b_target.empty()) {
        auto p = parse_poly(b_target, 0);
        check(pd_sparse_bounds(p.get(), &json.p));
      } else {
        if (b_r.empty()) throw Failure{kUsage, "bounds needs --r or --target"};
        const auto r = parse_r(b_r);
        check(pd_monomial_bounds(r.data(), r.size(), b_tree_k, &json.p));
      }
      emit(files, b_out, json.str());
    } else if (*plan) {
      CString out;
      if (p_csv) {
        char grid[64];
        std::snprintf(grid, sizeof grid, "%.17g", p_n);
        check(pd_plan_sweep(&p_k, 1, grid, &out.p));
      } else {
        check(pd_plan(p_n, p_k, &out.p));
      }
      emit(files, p_out, out.str());
    } else if (*sweep) {
      CString csv;
      check(pd_plan_sweep(s_k.data(), s_k.size(), s_grid.c_str(), &csv.p));
      emit(files, s_out, csv.str());
    } else if (*exper) {
      pd_grid_config g{};
      g.n = e_n;
      g.depths = e_depths.data();
      g.depth_count = e_depths.size();
      g.widths = e_widths.data();
      g.width_count = e_widths.size();
      g.seeds = e_seeds.data();
      g.seed_count = e_seeds.size();
      g.activation = e_act.c_str();
      g.steps = e_steps;
      g.batch_size = e_batch;
      g.eval_samples = e_eval;
      g.threads = e_threads;
      g.allow_long = e_long ? 1 : 0;
      g.timing = e_timing ? 1 : 0;
      // Rows stream as they finish: to stdout when the table goes there,
      // otherwise to stderr as progress.
      std::FILE* stream = e_out.empty() ? stdout : stderr;
      std::fputs("n,depth,width,seed,steps,activation,train_err,test_err,theory_width,wallclock_s\n", stream);
      auto on_row = [](const char* line, void* user) {
        std::fputs(line, static_cast<std::FILE*>(user));
        std::fflush(static_cast<std::FILE*>(user));
      };
      CString csv, svg;
      check(pd_experiment(&g, on_row, stream, &csv.p, e_svg.empty() ? nullptr : &svg.p));
      if (!e_out.empty()) files.add(e_out, csv.str());
      if (!e_svg.empty()) files.add(e_svg, svg.str());
    } else if (*self) {
      struct Ctx {
        std::vector<std::pair<int, std::string>> artifacts;
      } ctx;
      int all = 0;
      auto cb = [](const pd_criterion* c, void* user) {
        std::printf("%s  %d  %-24s %s  (%.1f s)\n", c->passed ? "PASS" : "FAIL", c->id, c->title, c->detail,
                    c->seconds);
        std::fflush(stdout);
        static_cast<Ctx*>(user)->artifacts.emplace_back(c->id, c->artifact);
      };
      check(pd_selftest(t_criteria.empty() ? nullptr : t_criteria.data(), t_criteria.size(), t_threads, cb,
                        &ctx, &all));
      if (!t_artifacts.empty()) {
        std::filesystem::create_directories(t_artifacts);
        for (const auto& [id, text] : ctx.artifacts)
          if (!text.empty())
            files.add((std::filesystem::path(t_artifacts) / ("criterion_" + std::to_string(id) + ".txt")).string(),
                      text);
      }
      // Artifacts are complete even when a criterion fails.
      files.commit();
      if (!all) rc = kVerifyFailed;
    }

    if (rc == kOk) files.commit();
    return rc;
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    if (f.code == kUsage) std::cerr << "run with --help for usage\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
