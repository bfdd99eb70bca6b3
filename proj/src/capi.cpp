#include "polydepth/polydepth.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "polydepth/bounds.hpp"
#include "polydepth/constructors.hpp"
#include "polydepth/error.hpp"
#include "polydepth/json_format.hpp"
#include "polydepth/planner.hpp"
#include "polydepth/selftest.hpp"
#include "polydepth/trainer.hpp"
#include "polydepth/verifier.hpp"

struct pd_polynomial {
  polydepth::SparsePolynomial p;
};

struct pd_network {
  polydepth::FeedforwardNetwork net;
};

namespace {

using namespace polydepth;

thread_local std::string last_error;

pd_status set_error(pd_status s, const char* what) {
  last_error = what;
  return s;
}

template <class F>
pd_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return PD_OK;
  } catch (const Error& e) {
    return set_error(static_cast<pd_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(PD_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(PD_INTERNAL, e.what());
  }
}

void need(const void* p, const char* name) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(name) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

ExponentVector exponents(const uint32_t* r, size_t n) {
  need(r, "r");
  require(n >= 1, ErrorCode::InvalidArgument, "exponent vector is empty");
  return ExponentVector(std::vector<Exponent>(r, r + n));
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json big(const BigInt& v) {
  if (v <= BigInt(std::numeric_limits<std::uint64_t>::max()))
    return Json(static_cast<std::uint64_t>(v));
  return Json(to_string(v));
}

Json bounds_json(const MonomialBounds& b) {
  Json j;
  j["r"] = b.r.to_string();
  j["degree"] = b.degree;
  j["shallow_exact"] = big(b.shallow_exact);
  j["deep_upper"] = b.deep_upper;
  j["thm5_max_coeff"] = big(b.thm5_max_coeff);
  j["thm5_simple"] = b.thm5_simple;
  Json trees = Json::array();
  for (const auto& t : b.tree_counts)
    trees.push_back({{"k", t.k}, {"b", t.b}, {"count", t.count}, {"exact", t.exact}});
  j["tree_counts"] = trees;
  return j;
}

Activation train_activation(const char* name) {
  const auto id = Nonlinearity::from_name(name ? name : "tanh").id();
  require(id == Activation::Tanh || id == Activation::Relu, ErrorCode::InvalidArgument,
          "training activation must be tanh or relu");
  return id;
}

TrainConfig to_config(const pd_train_config* c) {
  need(c, "config");
  TrainConfig t;
  t.n = c->n;
  t.depth = c->depth;
  t.width = c->width;
  t.activation = train_activation(c->activation);
  t.steps = c->steps;
  t.batch_size = c->batch_size;
  t.seed = c->seed;
  t.rho = c->rho;
  t.eps = c->eps;
  t.input_low = c->input_low;
  t.input_high = c->input_high;
  t.eval_samples = c->eval_samples;
  t.validate();
  return t;
}

}  // namespace

extern "C" {

const char* pd_last_error(void) { return last_error.c_str(); }

const char* pd_status_name(pd_status s) {
  switch (s) {
    case PD_OK: return "ok";
    case PD_INVALID_ARGUMENT: return "invalid argument";
    case PD_DIMENSION_MISMATCH: return "dimension mismatch";
    case PD_DOMAIN: return "domain error";
    case PD_NUMERIC: return "numeric error";
    case PD_PARSE: return "parse error";
    case PD_IO: return "i/o error";
    case PD_VERIFICATION_FAILED: return "verification failed";
    case PD_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* pd_version(void) { return "1.0.0"; }

void pd_string_free(char* s) { std::free(s); }

pd_status pd_polynomial_parse(const char* text, size_t n, pd_polynomial** out) {
  return guard([&] {
    need(text, "text");
    need(out, "out");
    *out = new pd_polynomial{SparsePolynomial::parse(text, n)};
  });
}

void pd_polynomial_free(pd_polynomial* p) { delete p; }

pd_status pd_polynomial_to_string(const pd_polynomial* p, char** out) {
  return guard([&] {
    need(p, "polynomial");
    need(out, "out");
    *out = dup(p->p.to_string());
  });
}

size_t pd_polynomial_variables(const pd_polynomial* p) { return p ? p->p.variables() : 0; }

unsigned pd_polynomial_degree(const pd_polynomial* p) { return p ? p->p.degree() : 0; }

pd_status pd_polynomial_evaluate(const pd_polynomial* p, const double* x, size_t n, double* out) {
  return guard([&] {
    need(p, "polynomial");
    need(x, "x");
    need(out, "out");
    require(n == p->p.variables(), ErrorCode::DimensionMismatch, "point has wrong dimension");
    *out = p->p.evaluate({x, n});
  });
}

pd_status pd_network_from_json(const char* json, pd_network** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new pd_network{FeedforwardNetwork::from_json(json)};
  });
}

pd_status pd_network_to_json(const pd_network* net, char** out) {
  return guard([&] {
    need(net, "network");
    need(out, "out");
    *out = dup(net->net.to_json());
  });
}

void pd_network_free(pd_network* net) { delete net; }

pd_status pd_network_info_get(const pd_network* net, pd_network_info* out) {
  return guard([&] {
    need(net, "network");
    need(out, "out");
    out->inputs = net->net.inputs();
    out->depth = net->net.depth();
    out->neurons = net->net.neuron_count();
    out->padding_neurons = net->net.padding_count();
    out->blocks = net->net.block_count();
  });
}

pd_status pd_network_eval(const pd_network* net, const double* x, size_t n, double* out) {
  return guard([&] {
    need(net, "network");
    need(x, "x");
    need(out, "out");
    require(n == net->net.inputs(), ErrorCode::DimensionMismatch, "point has wrong dimension");
    *out = net->net.eval1({x, n});
  });
}

pd_status pd_network_taylor(const pd_network* net, unsigned cap, char** out) {
  return guard([&] {
    need(net, "network");
    need(out, "out");
    *out = dup(taylor_expand(net->net, cap).to_text());
  });
}

pd_status pd_construct(const pd_polynomial* target, const char* activation, const char* mode,
                       size_t k, pd_network** out) {
  return guard([&] {
    need(target, "target");
    need(out, "out");
    const auto sigma = Nonlinearity::from_name(activation ? activation : "exp");
    const auto m = build_mode_from_string(mode ? mode : "shallow");
    *out = new pd_network{build_polynomial_network(target->p, sigma, m, k)};
  });
}

pd_status pd_certify_taylor(const pd_network* net, const pd_polynomial* target, double* max_deviation,
                            char** certificate_json) {
  return guard([&] {
    need(net, "network");
    need(target, "target");
    const auto cert = taylor_certificate(net->net, target->p);
    if (max_deviation) *max_deviation = cert.max_coeff_deviation;
    put(certificate_json, cert.to_json());
  });
}

pd_status pd_sup_error(const pd_network* net, const pd_polynomial* target, double radius,
                       size_t samples, uint64_t seed, double* max_abs_error) {
  return guard([&] {
    need(net, "network");
    need(target, "target");
    need(max_abs_error, "out");
    *max_abs_error = sup_error(net->net, target->p, radius, samples, seed).max_abs_error;
  });
}

pd_status pd_epsilonize(const pd_network* net, const pd_polynomial* target, double epsilon,
                        double radius, size_t samples, uint64_t seed, pd_network** out,
                        char** certificate_json) {
  return guard([&] {
    need(net, "network");
    need(target, "target");
    auto res = epsilonize(net->net, target->p, epsilon, radius, samples, seed);
    put(certificate_json, res.certificate.to_json());
    if (out) *out = new pd_network{std::move(res.network)};
  });
}

pd_status pd_derivative_rank(const pd_network* net, const uint32_t* r, size_t n, char** report_json) {
  return guard([&] {
    need(net, "network");
    need(report_json, "out");
    const auto rep = derivative_matrix_rank(net->net, exponents(r, n));
    Json j;
    j["r"] = exponents(r, n).to_string();
    j["rows"] = rep.rows;
    j["cols"] = rep.cols;
    j["rank"] = rep.rank;
    j["full_row_rank"] = rep.rank == rep.rows;
    j["singular_values"] = rep.singular_values;
    j["literal_rank"] = rep.literal_rank;
    j["literal_condition"] = finite_or_null(rep.literal_condition);
    *report_json = dup(dump_json(j) + "\n");
  });
}

pd_status pd_best_output_fit(const pd_network* net, const pd_polynomial* target, double* max_deviation) {
  return guard([&] {
    need(net, "network");
    need(target, "target");
    need(max_deviation, "out");
    *max_deviation = best_output_fit(net->net, target->p);
  });
}

pd_status pd_monomial_bounds(const uint32_t* r, size_t n, size_t max_tree_k, char** json) {
  return guard([&] {
    need(json, "out");
    *json = dup(dump_json(bounds_json(monomial_bounds(exponents(r, n), max_tree_k))) + "\n");
  });
}

pd_status pd_sparse_bounds(const pd_polynomial* p, char** json) {
  return guard([&] {
    need(p, "polynomial");
    need(json, "out");
    const auto sb = sparse_bounds(p->p);
    Json j;
    j["target"] = sb.p.to_string();
    j["sparsity"] = sb.p.sparsity();
    j["sparse_lower"] = sb.sparse_lower;
    j["sparse_lower_argmax"] =
        sb.monomials.empty() ? Json(nullptr) : Json(sb.monomials[sb.sparse_lower_argmax].r.to_string());
    j["sparse_upper"] = sb.sparse_upper;
    Json ms = Json::array();
    for (const auto& m : sb.monomials) ms.push_back(bounds_json(m));
    j["monomials"] = ms;
    *json = dup(dump_json(j) + "\n");
  });
}

pd_status pd_plan(double n, size_t k, char** json) {
  return guard([&] {
    need(json, "out");
    const auto plan = solve_optimal_groups(n, k);
    Json j;
    j["n"] = plan.n;
    j["k"] = plan.k;
    j["b"] = plan.b;
    j["integer_b"] = plan.integer_b;
    j["predicted_count"] = plan.predicted_count;
    j["integer_count"] = finite_or_null(plan.integer_count);
    j["asymptotic_width"] = finite_or_null(asymptotic_width(n, k));
    j["recursion_residual"] = plan.recursion_residual;
    j["constraint_residual"] = plan.constraint_residual;
    j["stationarity_residual"] = plan.stationarity_residual;
    *json = dup(dump_json(j) + "\n");
  });
}

pd_status pd_plan_sweep(const size_t* ks, size_t k_count, const char* n_grid, char** csv) {
  return guard([&] {
    need(ks, "ks");
    need(n_grid, "n_grid");
    need(csv, "out");
    require(k_count >= 1, ErrorCode::InvalidArgument, "need at least one k");
    const auto ns = parse_n_grid(n_grid);
    std::string s = "n,k,i,b_i,b_i_over_n^(1/k)\n";
    char buf[160];
    for (const auto& row : plan_sweep({ks, k_count}, ns)) {
      std::snprintf(buf, sizeof buf, "%.17g,%zu,%zu,%.17g,%.17g\n", row.n, row.k, row.i, row.b,
                    row.ratio);
      s += buf;
    }
    *csv = dup(s);
  });
}

pd_status pd_tree_count(size_t n, const size_t* b, size_t k, uint64_t* out) {
  return guard([&] {
    need(b, "b");
    need(out, "out");
    *out = tree_count(n, {b, k});
  });
}

pd_status pd_asymptotic_width(double n, size_t k, double* out) {
  return guard([&] {
    need(out, "out");
    *out = asymptotic_width(n, k);
  });
}

pd_status pd_depth_rule(double n, size_t width_cap, size_t* out) {
  return guard([&] {
    need(out, "out");
    *out = depth_rule_of_thumb(n, width_cap);
  });
}

void pd_train_config_default(pd_train_config* c) {
  if (!c) return;
  const TrainConfig t;
  c->n = t.n;
  c->depth = t.depth;
  c->width = t.width;
  c->activation = "tanh";
  c->steps = t.steps;
  c->batch_size = t.batch_size;
  c->seed = t.seed;
  c->rho = t.rho;
  c->eps = t.eps;
  c->input_low = t.input_low;
  c->input_high = t.input_high;
  c->eval_samples = t.eval_samples;
}

pd_status pd_train(const pd_train_config* config, pd_train_result* out, char** history_csv) {
  return guard([&] {
    need(out, "out");
    const auto r = train(to_config(config));
    out->train_err = r.final_train_err;
    out->test_err = r.final_test_err;
    out->theory_width = r.theory_width;
    out->wallclock_s = r.wallclock_s;
    if (history_csv) {
      std::string s = "step,train_err\n";
      char buf[96];
      for (const auto& [step, err] : r.err_history) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", step, err);
        s += buf;
      }
      *history_csv = dup(s);
    }
  });
}

pd_status pd_gradient_check(const pd_train_config* config, double* out) {
  return guard([&] {
    need(out, "out");
    *out = gradient_check(to_config(config));
  });
}

pd_status pd_experiment(const pd_grid_config* g, pd_line_callback on_row, void* user, char** csv,
                        char** svg) {
  return guard([&] {
    need(g, "grid");
    GridConfig grid;
    grid.n = g->n;
    if (g->depths) grid.depths.assign(g->depths, g->depths + g->depth_count);
    if (g->widths) grid.widths.assign(g->widths, g->widths + g->width_count);
    if (g->seeds) grid.seeds.assign(g->seeds, g->seeds + g->seed_count);
    grid.activation = train_activation(g->activation);
    grid.steps = g->steps;
    grid.batch_size = g->batch_size;
    grid.eval_samples = g->eval_samples;
    grid.threads = g->threads;
    grid.allow_long = g->allow_long != 0;
    const bool timing = g->timing != 0;
    const auto rows = experiment_grid(grid, [&](const TrainResult& r) {
      if (on_row) on_row(csv_row(r, timing).c_str(), user);
    });
    if (csv) {
      std::string s = csv_header();
      for (const auto& r : rows) s += csv_row(r, timing);
      *csv = dup(s);
    }
    if (svg) *svg = dup(heatmap_svg(rows));
  });
}

pd_status pd_selftest(const int* criteria, size_t count, size_t threads, pd_criterion_callback on_result,
                      void* user, int* all_passed) {
  return guard([&] {
    SelftestOptions opt;
    if (criteria) opt.criteria.assign(criteria, criteria + count);
    opt.threads = threads;
    const auto results = run_selftest(opt, [&](const CriterionResult& r) {
      if (!on_result) return;
      const pd_criterion c{r.id, r.title.c_str(), r.passed ? 1 : 0, r.detail.c_str(), r.seconds,
                           r.artifact.c_str()};
      on_result(&c, user);
    });
    bool ok = true;
    for (const auto& r : results) ok = ok && r.passed;
    if (all_passed) *all_passed = ok ? 1 : 0;
  });
}

}  // extern "C"
