#include "polydepth/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "polydepth/error.hpp"
#include "polydepth/json_format.hpp"

namespace polydepth {

std::string to_string(GateTag tag) {
  switch (tag) {
    case GateTag::Square: return "square";
    case GateTag::Product: return "product";
    case GateTag::Identity: return "identity";
    case GateTag::SignPattern: return "sign-pattern";
    case GateTag::Carry: return "carry";
    case GateTag::Vandermonde: return "vandermonde";
    case GateTag::Constant: return "constant";
  }
  return "?";
}

GateTag gate_tag_from_string(const std::string& s) {
  for (auto t : {GateTag::Square, GateTag::Product, GateTag::Identity, GateTag::SignPattern,
                 GateTag::Carry, GateTag::Vandermonde, GateTag::Constant})
    if (to_string(t) == s) return t;
  fail(ErrorCode::Parse, "unknown gate tag '" + s + "'");
}

FeedforwardNetwork::FeedforwardNetwork(std::size_t n, Nonlinearity activation,
                                       std::vector<AffineLayer> layers,
                                       std::vector<Annotation> annotations)
    : n_(n), activation_(activation), layers_(std::move(layers)),
      annotations_(std::move(annotations)) {
  require(n_ >= 1, ErrorCode::InvalidArgument, "network needs at least one input");
  require(!layers_.empty(), ErrorCode::InvalidArgument, "network needs an output layer");
  std::size_t prev = n_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const std::string where = "layer " + std::to_string(l);
    require(L.cols == prev, ErrorCode::DimensionMismatch,
            where + " expects " + std::to_string(L.cols) + " inputs, previous layer has " +
                std::to_string(prev));
    require(L.rows >= 1, ErrorCode::DimensionMismatch, where + " has no rows");
    require(L.weights.size() == L.rows * L.cols && L.bias.size() == L.rows,
            ErrorCode::DimensionMismatch, where + " storage does not match rows x cols");
    for (double v : L.weights)
      require(std::isfinite(v), ErrorCode::Numeric, where + " has a non-finite weight");
    for (double v : L.bias)
      require(std::isfinite(v), ErrorCode::Numeric, where + " has a non-finite bias");
    prev = L.rows;
  }

  if (annotations_.empty()) return;
  std::sort(annotations_.begin(), annotations_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.layer, a.from) < std::tie(b.layer, b.from);
  });
  std::size_t layer = 0, next = 0;
  for (const auto& a : annotations_) {
    require(a.layer < depth(), ErrorCode::InvalidArgument, "annotation on a non-hidden layer");
    if (a.layer != layer) {
      require(a.layer == layer + 1 && next == layers_[layer].rows, ErrorCode::InvalidArgument,
              "annotations do not cover hidden layer " + std::to_string(layer));
      layer = a.layer;
      next = 0;
    }
    require(a.from == next && a.to > a.from && a.to <= layers_[layer].rows,
            ErrorCode::InvalidArgument,
            "annotations must partition hidden layer " + std::to_string(layer));
    next = a.to;
  }
  require(layer + 1 == depth() && next == layers_[layer].rows, ErrorCode::InvalidArgument,
          "annotations do not cover every hidden neuron");
}

std::vector<std::size_t> FeedforwardNetwork::hidden_widths() const {
  std::vector<std::size_t> w;
  for (std::size_t l = 0; l < depth(); ++l) w.push_back(layers_[l].rows);
  return w;
}

std::size_t FeedforwardNetwork::neuron_count() const {
  const auto w = hidden_widths();
  return std::accumulate(w.begin(), w.end(), std::size_t{0});
}

std::size_t FeedforwardNetwork::count_tagged(GateTag tag) const {
  std::size_t c = 0;
  for (const auto& a : annotations_)
    if (a.tag == tag) c += a.to - a.from;
  return c;
}

std::size_t FeedforwardNetwork::block_count() const {
  std::size_t b = 0;
  for (const auto& a : annotations_) b = std::max(b, a.block + 1);
  return std::max<std::size_t>(b, 1);
}

std::size_t FeedforwardNetwork::padding_count() const {
  return count_tagged(GateTag::Carry) + count_tagged(GateTag::Constant);
}

std::vector<double> FeedforwardNetwork::eval(std::span<const double> x) const {
  require(x.size() == n_, ErrorCode::DimensionMismatch,
          "input has length " + std::to_string(x.size()) + ", network expects " +
              std::to_string(n_));
  std::vector<double> cur(x.begin(), x.end()), next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    next.assign(L.rows, 0.0);
    for (std::size_t r = 0; r < L.rows; ++r) {
      double s = L.bias[r];
      const double* w = L.weights.data() + r * L.cols;
      for (std::size_t c = 0; c < L.cols; ++c) s += w[c] * cur[c];
      next[r] = l + 1 < layers_.size() ? activation_.eval(s) : s;
      if (!std::isfinite(next[r]))
        fail(ErrorCode::Numeric, "non-finite value in layer " + std::to_string(l));
    }
    cur.swap(next);
  }
  return cur;
}

std::string FeedforwardNetwork::to_json() const {
  Json j;
  j["n"] = n_;
  j["activation"] = activation_.name();
  Json layers = Json::array();
  for (const auto& L : layers_) {
    Json lj;
    lj["rows"] = L.rows;
    lj["cols"] = L.cols;
    lj["weights"] = L.weights;
    lj["bias"] = L.bias;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  Json ann = Json::array();
  for (const auto& a : annotations_) {
    Json aj;
    aj["layer"] = a.layer;
    aj["from"] = a.from;
    aj["to"] = a.to;
    aj["tag"] = to_string(a.tag);
    aj["block"] = a.block;
    ann.push_back(std::move(aj));
  }
  j["annotations"] = std::move(ann);
  return dump_json(j) + "\n";
}

FeedforwardNetwork FeedforwardNetwork::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
    const auto n = j.at("n").get<std::size_t>();
    const auto act = Nonlinearity::from_name(j.at("activation").get<std::string>());
    std::vector<AffineLayer> layers;
    for (const auto& lj : j.at("layers")) {
      AffineLayer L;
      L.rows = lj.at("rows").get<std::size_t>();
      L.cols = lj.at("cols").get<std::size_t>();
      L.weights = lj.at("weights").get<std::vector<double>>();
      L.bias = lj.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(L));
    }
    std::vector<Annotation> ann;
    if (j.contains("annotations")) {
      for (const auto& aj : j.at("annotations"))
        ann.push_back({aj.at("layer").get<std::size_t>(), aj.at("from").get<std::size_t>(),
                       aj.at("to").get<std::size_t>(),
                       gate_tag_from_string(aj.at("tag").get<std::string>()),
                       aj.value("block", std::size_t{0})});
    }
    return FeedforwardNetwork(n, act, std::move(layers), std::move(ann));
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, std::string("network JSON: ") + e.what());
  }
}

std::vector<TruncatedSeries> taylor_expand_all(const FeedforwardNetwork& net, unsigned cap) {
  require(net.activation().analytic(), ErrorCode::Domain,
          "Taylor expansion needs an analytic activation, got '" + net.activation().name() +
              "'");
  const std::size_t n = net.inputs();
  std::vector<TruncatedSeries> cur;
  for (std::size_t i = 0; i < n; ++i) cur.push_back(TruncatedSeries::variable(n, cap, i));

  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    std::vector<const TruncatedSeries*> parts;
    for (const auto& s : cur) parts.push_back(&s);
    std::vector<TruncatedSeries> next;
    next.reserve(L.rows);
    for (std::size_t r = 0; r < L.rows; ++r) {
      auto pre = linear_combination(parts, L.row(r), L.bias[r], n, cap);
      next.push_back(l + 1 < layers.size() ? series_compose(net.activation(), pre)
                                           : std::move(pre));
    }
    cur = std::move(next);
  }
  return cur;
}

TruncatedSeries taylor_expand(const FeedforwardNetwork& net, unsigned cap) {
  return taylor_expand_all(net, cap).front();
}

FeedforwardNetwork pad_depth(const FeedforwardNetwork& net, std::size_t depth) {
  require(depth >= net.depth(), ErrorCode::InvalidArgument,
          "cannot pad a depth-" + std::to_string(net.depth()) + " network to depth " +
              std::to_string(depth));
  if (depth == net.depth()) return net;
  const auto& sigma = net.activation();
  const double s0 = sigma.eval(0.0);
  const double s1 = sigma.coefficient(1);
  require(s1 != 0.0, ErrorCode::Domain,
          "identity gate needs a nonzero first Taylor coefficient for '" + sigma.name() + "'");

  const std::vector<double> origin(net.inputs(), 0.0);
  const auto y0 = net.eval(origin);
  const std::size_t m = net.outputs();

  auto layers = net.layers();
  auto ann = net.annotations();
  // A gate on the summed output mixes every block, so they merge.
  for (auto& a : ann) a.block = 0;
  for (std::size_t extra = net.depth(); extra < depth; ++extra) {
    // Output map becomes the pre-activation of one identity gate per output,
    // centered so each gate sees a zero constant term.
    AffineLayer& out = layers.back();
    for (std::size_t r = 0; r < m; ++r) out.bias[r] -= y0[r];
    ann.push_back({layers.size() - 1, 0, m, GateTag::Carry});
    AffineLayer next(m, m);
    for (std::size_t r = 0; r < m; ++r) {
      next.w(r, r) = 1.0 / s1;
      next.bias[r] = y0[r] - s0 / s1;
    }
    layers.push_back(std::move(next));
  }
  return FeedforwardNetwork(net.inputs(), sigma, std::move(layers), std::move(ann));
}

FeedforwardNetwork sum_networks(std::span<const FeedforwardNetwork> nets) {
  require(!nets.empty(), ErrorCode::InvalidArgument, "sum_networks needs at least one network");
  const auto& first = nets.front();
  std::size_t depth = 0;
  for (const auto& net : nets) {
    require(net.inputs() == first.inputs(), ErrorCode::DimensionMismatch,
            "summands disagree on input count");
    require(net.activation() == first.activation(), ErrorCode::InvalidArgument,
            "summands mix activations '" + first.activation().name() + "' and '" +
                net.activation().name() + "'");
    require(net.outputs() == first.outputs(), ErrorCode::DimensionMismatch,
            "summands disagree on output count");
    depth = std::max(depth, net.depth());
  }
  std::vector<FeedforwardNetwork> padded;
  for (const auto& net : nets) padded.push_back(pad_depth(net, depth));

  const std::size_t n = first.inputs(), m = first.outputs();
  std::vector<AffineLayer> layers;
  std::vector<Annotation> ann;
  std::vector<std::size_t> block_base;
  for (std::size_t k = 0, total = 0; k < padded.size(); ++k) {
    block_base.push_back(total);
    total += padded[k].block_count();
  }
  std::vector<std::size_t> prev_offsets(padded.size(), 0);
  std::size_t prev_width = n;
  for (std::size_t l = 0; l <= depth; ++l) {
    const bool output = l == depth;
    std::size_t width = 0;
    std::vector<std::size_t> offsets;
    for (const auto& net : padded) {
      offsets.push_back(width);
      width += output ? 0 : net.layers()[l].rows;
    }
    AffineLayer L(output ? m : width, prev_width);
    for (std::size_t k = 0; k < padded.size(); ++k) {
      const auto& src = padded[k].layers()[l];
      const std::size_t row0 = output ? 0 : offsets[k];
      const std::size_t col0 = l == 0 ? 0 : prev_offsets[k];
      for (std::size_t r = 0; r < src.rows; ++r) {
        for (std::size_t c = 0; c < src.cols; ++c) L.w(row0 + r, col0 + c) += src.w(r, c);
        L.bias[row0 + r] += src.bias[r];
      }
      if (!output)
        for (const auto& a : padded[k].annotations())
          if (a.layer == l)
            ann.push_back(
                {l, a.from + offsets[k], a.to + offsets[k], a.tag, a.block + block_base[k]});
    }
    layers.push_back(std::move(L));
    prev_offsets = offsets;
    prev_width = width;
  }
  // Partial annotation coverage would be rejected; drop it if any summand was bare.
  std::size_t tagged = 0;
  for (const auto& a : ann) tagged += a.to - a.from;
  std::size_t hidden = 0;
  for (std::size_t l = 0; l < depth; ++l) hidden += layers[l].rows;
  if (tagged != hidden) ann.clear();
  return FeedforwardNetwork(n, first.activation(), std::move(layers), std::move(ann));
}

FeedforwardNetwork rescale_network(const FeedforwardNetwork& net, unsigned d, double delta) {
  require(delta > 0.0 && delta <= 1.0, ErrorCode::InvalidArgument,
          "delta must lie in (0, 1], got " + std::to_string(delta));
  const double scale = std::pow(delta, static_cast<double>(d));
  require(scale >= std::numeric_limits<double>::min() && std::isfinite(1.0 / scale),
          ErrorCode::Numeric,
          "delta^d underflows for delta=" + std::to_string(delta) + ", d=" + std::to_string(d));
  if (delta == 1.0) return net;
  auto layers = net.layers();
  // Only input weights scale: N(delta x) leaves every bias untouched.
  for (auto& w : layers.front().weights) w *= delta;
  for (auto& w : layers.back().weights) w /= scale;
  for (auto& b : layers.back().bias) b /= scale;
  return FeedforwardNetwork(net.inputs(), net.activation(), std::move(layers), net.annotations());
}

FeedforwardNetwork block_subnetwork(const FeedforwardNetwork& net, std::size_t block) {
  require(block < net.block_count(), ErrorCode::InvalidArgument,
          "block " + std::to_string(block) + " out of range");
  const std::size_t depth = net.depth();
  // keep[l][j]: hidden neuron j of layer l belongs to the block.
  std::vector<std::vector<char>> keep(depth);
  for (std::size_t l = 0; l < depth; ++l)
    keep[l].assign(net.layers()[l].rows, net.annotations().empty() ? 1 : 0);
  for (const auto& a : net.annotations())
    if (a.block == block)
      for (std::size_t j = a.from; j < a.to; ++j) keep[a.layer][j] = 1;

  std::vector<AffineLayer> layers;
  std::vector<Annotation> ann;
  for (std::size_t l = 0; l <= depth; ++l) {
    const auto& src = net.layers()[l];
    std::vector<std::size_t> rows, cols;
    for (std::size_t r = 0; r < src.rows; ++r)
      if (l == depth || keep[l][r]) rows.push_back(r);
    for (std::size_t c = 0; c < src.cols; ++c)
      if (l == 0 || keep[l - 1][c]) cols.push_back(c);
    if (l > 0)
      for (std::size_t r : rows)
        for (std::size_t c = 0; c < src.cols; ++c)
          require(keep[l - 1][c] || src.w(r, c) == 0.0 || l == depth, ErrorCode::InvalidArgument,
                  "block " + std::to_string(block) + " reads another block in layer " +
                      std::to_string(l));
    AffineLayer L(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) L.w(i, j) = src.w(rows[i], cols[j]);
      L.bias[i] = l == depth ? 0.0 : src.bias[rows[i]];
    }
    layers.push_back(std::move(L));
  }
  for (const auto& a : net.annotations()) {
    if (a.block != block) continue;
    std::size_t shift = 0;
    for (std::size_t j = 0; j < a.from; ++j) shift += keep[a.layer][j] ? 0 : 1;
    ann.push_back({a.layer, a.from - shift, a.to - shift, a.tag, 0});
  }
  return FeedforwardNetwork(net.inputs(), net.activation(), std::move(layers), std::move(ann));
}

FeedforwardNetwork scale_output(const FeedforwardNetwork& net, double factor, double offset) {
  auto layers = net.layers();
  for (auto& w : layers.back().weights) w *= factor;
  for (auto& b : layers.back().bias) b = b * factor + offset;
  return FeedforwardNetwork(net.inputs(), net.activation(), std::move(layers), net.annotations());
}

}  // namespace polydepth
