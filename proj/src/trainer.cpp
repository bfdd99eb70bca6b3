#include "polydepth/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

#include "polydepth/error.hpp"
#include "polydepth/planner.hpp"
#include "polydepth/rng.hpp"

namespace polydepth {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kTestStream = 3;
constexpr std::uint64_t kCheckStream = 4;

// Init and batch streams depend on the architecture as well, so grid cells are
// independent; the test set depends on the seed only.
std::uint64_t run_key(const TrainConfig& c) {
  return splitmix64(c.seed ^ splitmix64((c.depth << 32) ^ c.width));
}

Eigen::MatrixXd sample_inputs(const TrainConfig& c, std::uint64_t key, std::uint64_t stream,
                              std::size_t first, std::size_t count) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(c.n), static_cast<Eigen::Index>(count));
  for (std::size_t col = 0; col < count; ++col)
    for (std::size_t i = 0; i < c.n; ++i)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) =
          c.input_low + (c.input_high - c.input_low) *
                            counter_uniform(key, stream, (first + col) * c.n + i);
  return X;
}

Eigen::RowVectorXd product_target(const Eigen::MatrixXd& X) { return X.colwise().prod(); }

void activate(Activation a, Eigen::MatrixXd& Z) {
  if (a == Activation::Tanh)
    Z = Z.array().tanh().matrix();
  else if (a == Activation::Relu)
    Z = Z.cwiseMax(0.0);
  else
    fail(ErrorCode::InvalidArgument, "trainer supports tanh and relu");
}

// Returns the activations of every layer; acts[0] = X, acts.back() = output.
std::vector<Eigen::MatrixXd> forward_all(const Mlp& net, const Eigen::MatrixXd& X) {
  std::vector<Eigen::MatrixXd> acts{X};
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    Eigen::MatrixXd Z = (net.W[l] * acts.back()).colwise() + net.b[l];
    if (l + 1 < net.W.size()) activate(net.activation, Z);
    acts.push_back(std::move(Z));
  }
  return acts;
}

struct Gradients {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
};

Gradients backward(const Mlp& net, const std::vector<Eigen::MatrixXd>& acts,
                   Eigen::MatrixXd delta) {
  Gradients g;
  g.W.resize(net.W.size());
  g.b.resize(net.W.size());
  for (std::size_t l = net.W.size(); l-- > 0;) {
    g.W[l] = delta * acts[l].transpose();
    g.b[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd up = net.W[l].transpose() * delta;
    const auto& h = acts[l];
    if (net.activation == Activation::Tanh)
      up.array() *= 1.0 - h.array().square();
    else
      up.array() *= (h.array() > 0.0).cast<double>();
    delta = std::move(up);
  }
  return g;
}

double sign0(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

void TrainConfig::validate() const {
  require(n >= 1 && depth >= 1 && width >= 1, ErrorCode::InvalidArgument,
          "n, depth and width must be positive");
  require(batch_size >= 1 && eval_samples >= 1, ErrorCode::InvalidArgument,
          "batch size and evaluation samples must be positive");
  require(activation == Activation::Tanh || activation == Activation::Relu,
          ErrorCode::InvalidArgument, "trainer supports tanh and relu");
  require(rho > 0 && rho < 1 && eps > 0, ErrorCode::InvalidArgument, "bad AdaDelta constants");
  require(input_high > input_low, ErrorCode::InvalidArgument, "empty input interval");
}

std::size_t Mlp::parameter_count() const {
  std::size_t c = 0;
  for (std::size_t l = 0; l < W.size(); ++l)
    c += static_cast<std::size_t>(W[l].size() + b[l].size());
  return c;
}

std::vector<double*> Mlp::parameters() {
  std::vector<double*> out;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (Eigen::Index i = 0; i < W[l].size(); ++i) out.push_back(W[l].data() + i);
    for (Eigen::Index i = 0; i < b[l].size(); ++i) out.push_back(b[l].data() + i);
  }
  return out;
}

Eigen::RowVectorXd Mlp::forward(const Eigen::MatrixXd& X) const {
  return forward_all(*this, X).back();
}

Mlp init_mlp(const TrainConfig& config) {
  config.validate();
  Mlp net;
  net.activation = config.activation;
  const std::uint64_t key = run_key(config);
  std::uint64_t counter = 0;
  std::size_t fan_in = config.n;
  for (std::size_t l = 0; l <= config.depth; ++l) {
    const std::size_t fan_out = l == config.depth ? 1 : config.width;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd W(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index i = 0; i < W.size(); ++i)
      W.data()[i] = limit * (2.0 * counter_uniform(key, kInitStream, counter++) - 1.0);
    net.W.push_back(std::move(W));
    net.b.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out)));
    fan_in = fan_out;
  }
  return net;
}

double product_mae(const Mlp& net, const TrainConfig& config, std::uint64_t stream,
                   std::size_t count) {
  double total = 0.0;
  for (std::size_t first = 0; first < count; first += 4096) {
    const std::size_t m = std::min<std::size_t>(4096, count - first);
    const auto X = sample_inputs(config, config.seed, stream, first, m);
    total += (net.forward(X) - product_target(X)).cwiseAbs().sum();
  }
  return total / static_cast<double>(count);
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  result.config = config;
  result.theory_width = asymptotic_width(static_cast<double>(config.n), config.depth);

  Mlp net = init_mlp(config);
  const std::uint64_t key = run_key(config);
  const std::size_t B = config.batch_size;
  std::vector<Eigen::MatrixXd> gW2, dW2;
  std::vector<Eigen::VectorXd> gb2, db2;
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    gW2.push_back(Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
    dW2.push_back(gW2.back());
    gb2.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
    db2.push_back(gb2.back());
  }
  const double rho = config.rho, eps = config.eps;
  auto adadelta = [&](auto& theta, const auto& g, auto& Eg2, auto& Edx2) {
    Eg2.array() = rho * Eg2.array() + (1 - rho) * g.array().square();
    const auto dx = (-((Edx2.array() + eps).sqrt() / (Eg2.array() + eps).sqrt()) * g.array()).eval();
    Edx2.array() = rho * Edx2.array() + (1 - rho) * dx.square();
    theta.array() += dx;
  };

  const std::size_t window = std::max<std::size_t>(1, std::min<std::size_t>(100, config.steps));
  std::vector<double> recent;
  double history_sum = 0.0;
  std::size_t history_count = 0;
  for (std::size_t step = 0; step < std::max<std::size_t>(config.steps, 1); ++step) {
    const auto X = sample_inputs(config, key, kBatchStream, step * B, B);
    const auto acts = forward_all(net, X);
    const Eigen::RowVectorXd diff = acts.back() - product_target(X);
    const double loss = diff.cwiseAbs().mean();
    if (!std::isfinite(loss))
      fail(ErrorCode::Numeric, "training diverged at step " + std::to_string(step));
    recent.push_back(loss);
    if (recent.size() > window) recent.erase(recent.begin());
    if (config.steps == 0) break;

    history_sum += loss;
    if (++history_count == config.history_every || step + 1 == config.steps) {
      result.err_history.emplace_back(step + 1, history_sum / static_cast<double>(history_count));
      history_sum = 0.0;
      history_count = 0;
    }
    Eigen::MatrixXd delta = diff.unaryExpr(&sign0) / static_cast<double>(B);
    const auto g = backward(net, acts, std::move(delta));
    for (std::size_t l = 0; l < net.W.size(); ++l) {
      adadelta(net.W[l], g.W[l], gW2[l], dW2[l]);
      adadelta(net.b[l], g.b[l], gb2[l], db2[l]);
    }
  }
  double sum = 0.0;
  for (double v : recent) sum += v;
  result.final_train_err = sum / static_cast<double>(recent.size());
  result.final_test_err = product_mae(net, config, kTestStream, config.eval_samples);
  if (!std::isfinite(result.final_test_err))
    fail(ErrorCode::Numeric, "non-finite test error after training");
  result.wallclock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Which relu units are on, sample by sample; empty for smooth activations.
std::vector<bool> relu_pattern(const Mlp& net, const Eigen::MatrixXd& X) {
  std::vector<bool> on;
  if (net.activation != Activation::Relu) return on;
  const auto acts = forward_all(net, X);
  for (std::size_t l = 1; l + 1 < acts.size(); ++l)
    for (Eigen::Index i = 0; i < acts[l].size(); ++i) on.push_back(acts[l].data()[i] > 0.0);
  return on;
}

double gradient_check(const Mlp& net_in, const TrainConfig& config, std::size_t checks) {
  Mlp net = net_in;
  const std::size_t B = 16;
  const auto X = sample_inputs(config, config.seed, kCheckStream, 0, B);
  const Eigen::RowVectorXd Y = product_target(X);
  auto loss = [&](const Mlp& m) { return 0.5 * (m.forward(X) - Y).squaredNorm() / B; };

  const auto acts = forward_all(net, X);
  const auto g = backward(net, acts, (acts.back() - Y) / static_cast<double>(B));
  std::vector<double> analytic;
  for (std::size_t l = 0; l < g.W.size(); ++l) {
    analytic.insert(analytic.end(), g.W[l].data(), g.W[l].data() + g.W[l].size());
    analytic.insert(analytic.end(), g.b[l].data(), g.b[l].data() + g.b[l].size());
  }
  auto params = net.parameters();
  const std::size_t total = params.size();
  std::vector<std::size_t> picks;
  if (total <= checks) {
    for (std::size_t i = 0; i < total; ++i) picks.push_back(i);
  } else {
    for (std::size_t t = 0; picks.size() < checks; ++t) {
      const std::size_t i = counter_hash(config.seed, kCheckStream + 1, t) % total;
      if (std::find(picks.begin(), picks.end(), i) == picks.end()) picks.push_back(i);
    }
  }
  const double h = 1e-5;
  const auto pattern = relu_pattern(net, X);
  double worst = 0.0;
  for (std::size_t i : picks) {
    const double saved = *params[i];
    *params[i] = saved + h;
    const double up = loss(net);
    const bool kink_up = relu_pattern(net, X) != pattern;
    *params[i] = saved - h;
    const double down = loss(net);
    const bool kink_down = relu_pattern(net, X) != pattern;
    *params[i] = saved;
    // A difference that crosses a relu kink does not measure the derivative.
    if (kink_up || kink_down) continue;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max(std::abs(numeric), std::abs(analytic[i]));
    if (scale < 1e-12) continue;
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

double gradient_check(const TrainConfig& config, std::size_t checks) {
  return gradient_check(init_mlp(config), config, checks);
}

std::size_t grid_threads(std::size_t requested) {
  std::size_t t = requested;
  if (t == 0) {
    t = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("POLYDEPTH_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && v >= 1) t = static_cast<std::size_t>(v);
    }
  }
  return std::max<std::size_t>(t, 1);
}

std::vector<TrainResult> experiment_grid(const GridConfig& grid,
                                         const std::function<void(const TrainResult&)>& on_row) {
  require(grid.allow_long || grid.n <= 8, ErrorCode::InvalidArgument,
          "n=" + std::to_string(grid.n) + " is a long-running grid; opt in explicitly");
  require(!grid.depths.empty() && !grid.widths.empty() && !grid.seeds.empty(),
          ErrorCode::InvalidArgument, "grid needs depths, widths and seeds");
  std::vector<TrainConfig> jobs;
  for (std::size_t depth : grid.depths)
    for (std::size_t width : grid.widths)
      for (std::uint64_t seed : grid.seeds) {
        TrainConfig c;
        c.n = grid.n;
        c.depth = depth;
        c.width = width;
        c.seed = seed;
        c.activation = grid.activation;
        c.steps = grid.steps;
        c.batch_size = grid.batch_size;
        c.eval_samples = grid.eval_samples;
        c.validate();
        jobs.push_back(c);
      }

  std::vector<TrainResult> results(jobs.size());
  std::vector<char> finished(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t emitted = 0;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      TrainResult r;
      try {
        r = train(jobs[j]);
      } catch (const std::exception& e) {
        r.config = jobs[j];
        r.final_train_err = r.final_test_err = NAN;
        r.theory_width = asymptotic_width(static_cast<double>(jobs[j].n), jobs[j].depth);
        r.error = e.what();
      }
      std::lock_guard lock(mu);
      results[j] = std::move(r);
      finished[j] = 1;
      while (emitted < jobs.size() && finished[emitted]) {
        if (on_row) on_row(results[emitted]);
        ++emitted;
      }
    }
  };
  const std::size_t threads = std::min(grid_threads(grid.threads), jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

std::string csv_header() {
  return "n,depth,width,seed,steps,activation,train_err,test_err,theory_width,wallclock_s\n";
}

std::string csv_row(const TrainResult& r, bool timing) {
  const auto& c = r.config;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%llu,%zu,%s,%.17g,%.17g,%.17g,%.3f\n", c.n, c.depth,
                c.width, static_cast<unsigned long long>(c.seed), c.steps,
                Nonlinearity(c.activation).name().c_str(), r.final_train_err, r.final_test_err,
                r.theory_width, timing ? r.wallclock_s : 0.0);
  return buf;
}

std::string heatmap_svg(const std::vector<TrainResult>& rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "heat map needs at least one row");
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cells;
  std::vector<std::size_t> depths, widths;
  for (const auto& r : rows) {
    cells[{r.config.depth, r.config.width}].push_back(r.final_test_err);
    depths.push_back(r.config.depth);
    widths.push_back(r.config.width);
  }
  auto uniq = [](std::vector<std::size_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(depths);
  uniq(widths);
  auto median = [](std::vector<double> v) {
    std::erase_if(v, [](double x) { return !std::isfinite(x); });
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  double lo = INFINITY, hi = -INFINITY;
  std::map<std::pair<std::size_t, std::size_t>, double> med;
  for (auto& [key, errs] : cells) {
    const double m = median(errs);
    med[key] = m;
    if (std::isfinite(m) && m > 0) {
      lo = std::min(lo, std::log10(m));
      hi = std::max(hi, std::log10(m));
    }
  }
  if (!(hi > lo)) hi = lo + 1;

  const double cw = 70, ch = 50, left = 80, top = 40;
  const double W = left + cw * static_cast<double>(widths.size()) + 120;
  const double H = top + ch * static_cast<double>(depths.size()) + 60;
  std::string svg;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                W, H);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.0f\" y=\"20\">log10 median test error, n=%zu</text>\n", left,
                rows.front().config.n);
  svg += buf;
  for (std::size_t di = 0; di < depths.size(); ++di) {
    const double y = top + ch * static_cast<double>(di);
    std::snprintf(buf, sizeof buf, "<text x=\"10\" y=\"%.1f\">depth %zu</text>\n", y + ch / 2 + 4,
                  depths[di]);
    svg += buf;
    for (std::size_t wi = 0; wi < widths.size(); ++wi) {
      const double x = left + cw * static_cast<double>(wi);
      const double m = med[{depths[di], widths[wi]}];
      const double t = std::isfinite(m) && m > 0 ? (std::log10(m) - lo) / (hi - lo) : 1.0;
      const int red = static_cast<int>(255 * t), blue = static_cast<int>(255 * (1 - t));
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                    "fill=\"rgb(%d,60,%d)\" stroke=\"white\"/>\n"
                    "<text x=\"%.1f\" y=\"%.1f\" fill=\"white\" text-anchor=\"middle\">%.2f</text>\n",
                    x, y, cw, ch, red, blue, x + cw / 2, y + ch / 2 + 4,
                    std::isfinite(m) && m > 0 ? std::log10(m) : NAN);
      svg += buf;
    }
  }
  for (std::size_t wi = 0; wi < widths.size(); ++wi) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">w=%zu</text>\n",
                  left + cw * (static_cast<double>(wi) + 0.5),
                  top + ch * static_cast<double>(depths.size()) + 18, widths[wi]);
    svg += buf;
  }
  // Theory width placed on the log-width axis through the column centers.
  auto xpos = [&](double w) {
    const double lw = std::log(w);
    if (widths.size() == 1) return left + cw / 2;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const double a = std::log(static_cast<double>(widths[i]));
      const double b = std::log(static_cast<double>(widths[i + 1]));
      if (lw <= b || i + 2 == widths.size()) {
        const double t = std::clamp((lw - a) / (b - a), i == 0 ? -0.5 : 0.0,
                                    i + 2 == widths.size() ? 1.5 : 1.0);
        return left + cw * (static_cast<double>(i) + 0.5 + t);
      }
    }
    return left + cw / 2;
  };
  svg += "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"";
  const double n = static_cast<double>(rows.front().config.n);
  for (std::size_t di = 0; di < depths.size(); ++di) {
    std::snprintf(buf, sizeof buf, "%.1f,%.1f ", xpos(asymptotic_width(n, depths[di])),
                  top + ch * (static_cast<double>(di) + 0.5));
    svg += buf;
  }
  svg += "\"/>\n</svg>\n";
  return svg;
}

}  // namespace polydepth
