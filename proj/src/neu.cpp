#include "pcup/neu.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <vector>

#include "pcup/cloud.hpp"

namespace pcup {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd linear_forward(const Eigen::MatrixXd& x, const Linear& layer) {
  return (x * layer.weight).rowwise() + layer.bias;
}

// y = x·W + b backward: accumulates the layer gradient and returns d(x).
Eigen::MatrixXd linear_backward(const Eigen::MatrixXd& x, const Linear& layer,
                                const Eigen::MatrixXd& d_y, Linear& grad) {
  grad.weight += x.transpose() * d_y;
  grad.bias += d_y.colwise().sum();
  return d_y * layer.weight.transpose();
}

void check_layer(const Linear& layer, Index fan_in, Index fan_out, const char* name) {
  require(layer.weight.rows() == fan_in && layer.weight.cols() == fan_out,
          "neu: layer weight shape does not compose");
  require(layer.bias.size() == fan_out, "neu: layer bias shape does not compose");
  require_finite(layer.weight, name);
  require_finite(layer.bias, name);
}

void check_stage(const NeuStage& stage, Index c, const char* name) {
  check_layer(stage.interp_hidden, 2 * c, c, name);
  check_layer(stage.interp_gates, c, 2, name);
  check_layer(stage.query, c + 2, c + 2, name);
  check_layer(stage.key, c + 2, c + 2, name);
  check_layer(stage.value, c + 2, c + 2, name);
  check_layer(stage.fuse, c + 2, c, name);
}

// Canonical layer order used by init, flatten, and serialization.
template <typename Params>
auto layer_list(Params& p) {
  using LinearT = std::conditional_t<std::is_const_v<Params>, const Linear, Linear>;
  return std::vector<LinearT*>{
      &p.lift_hidden,          &p.lift_out,           &p.stage1.interp_hidden,
      &p.stage1.interp_gates,  &p.stage1.query,       &p.stage1.key,
      &p.stage1.value,         &p.stage1.fuse,        &p.compress,
      &p.stage2.interp_hidden, &p.stage2.interp_gates, &p.stage2.query,
      &p.stage2.key,           &p.stage2.value,       &p.stage2.fuse,
      &p.head_hidden,          &p.head_out};
}

using NeighborTable = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

// Everything the backward pass needs from one expansion stage.
struct StageTape {
  FeatureMap in;               // stage input, N×c
  Eigen::MatrixXd pair;        // (N·k)×2c rows [x_neighbor, x_center]
  Eigen::MatrixXd hidden_pre;  // gate MLP pre-activation
  Eigen::MatrixXd gates;       // (N·k)×2 logits
  FeatureMap expanded;         // gated rows, (N·k)×c
  FeatureMap coded;            // with grid codes, attention input
  Eigen::MatrixXd qm, km, vm;  // attention projections
  Eigen::MatrixXd attn;        // row-stochastic attention weights
  FeatureMap attended;         // residual + attn·vm
  FeatureMap fused;            // stage output, (N·k)×c
};

void interpolate_tape(const NeuStage& stage, const FeatureMap& x, const NeighborTable& nn,
                      StageTape& tape) {
  const Index n = x.rows();
  const Index c = x.cols();
  const Index k = nn.cols();
  tape.in = x;
  tape.pair.resize(n * k, 2 * c);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j)
      tape.pair.row(i * k + j) << x.row(nn(i, j)), x.row(i);
  tape.hidden_pre = linear_forward(tape.pair, stage.interp_hidden);
  tape.gates = linear_forward(tape.hidden_pre.cwiseMax(0.0), stage.interp_gates);
  tape.expanded.resize(n * k, c);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) {
      const Index row = i * k + j;
      const double center = stable_sigmoid(tape.gates(row, 0));
      const double neighbor = stable_sigmoid(tape.gates(row, 1));
      tape.expanded.row(row) = center * x.row(i) + neighbor * x.row(nn(i, j));
    }
}

void attention_tape(const NeuStage& stage, const FeatureMap& y, StageTape& tape) {
  const Index cp = y.cols();
  tape.qm = linear_forward(y, stage.query);
  tape.km = linear_forward(y, stage.key);
  tape.vm = linear_forward(y, stage.value);
  tape.attn = tape.qm * tape.km.transpose() / std::sqrt(static_cast<double>(cp));
  for (Index r = 0; r < tape.attn.rows(); ++r) {
    auto row = tape.attn.row(r);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  tape.attended = y + tape.attn * tape.vm;
}

void stage_forward(const NeuStage& stage, const FeatureMap& x, const NeighborTable& nn,
                   StageTape& tape) {
  interpolate_tape(stage, x, nn, tape);
  tape.coded = grid_code_append(tape.expanded, nn.cols());
  attention_tape(stage, tape.coded, tape);
  tape.fused = linear_forward(tape.attended, stage.fuse);
}

// Reverse of stage_forward: accumulates parameter gradients into `grad` and
// returns d(stage input).
FeatureMap stage_backward(const NeuStage& stage, const StageTape& tape, const NeighborTable& nn,
                          const FeatureMap& d_fused, NeuStage& grad) {
  const Index c = tape.in.cols();
  const Index k = nn.cols();
  const Eigen::MatrixXd d_attended = linear_backward(tape.attended, stage.fuse, d_fused, grad.fuse);

  // Attention: out = y + P·V(y) with P = softmax(Q(y)·K(y)ᵀ/√c').
  Eigen::MatrixXd d_coded = d_attended;  // residual path
  const Eigen::MatrixXd d_attn = d_attended * tape.vm.transpose();
  const Eigen::MatrixXd d_vm = tape.attn.transpose() * d_attended;
  // Row-wise softmax backward: dS = P ⊙ (dP − rowsum(dP ⊙ P)).
  Eigen::MatrixXd d_scores =
      tape.attn.array() *
      (d_attn.array().colwise() - (d_attn.array() * tape.attn.array()).rowwise().sum());
  d_scores /= std::sqrt(static_cast<double>(tape.coded.cols()));
  const Eigen::MatrixXd d_qm = d_scores * tape.km;
  const Eigen::MatrixXd d_km = d_scores.transpose() * tape.qm;
  d_coded += linear_backward(tape.coded, stage.query, d_qm, grad.query);
  d_coded += linear_backward(tape.coded, stage.key, d_km, grad.key);
  d_coded += linear_backward(tape.coded, stage.value, d_vm, grad.value);

  // Grid codes are constants; only the feature columns carry gradient.
  const Eigen::MatrixXd d_expanded = d_coded.leftCols(c);

  // Gated rows: h = σ(g₀)·x_center + σ(g₁)·x_neighbor.
  FeatureMap d_in = FeatureMap::Zero(tape.in.rows(), c);
  Eigen::MatrixXd d_gates(tape.gates.rows(), 2);
  for (Index i = 0; i < tape.in.rows(); ++i)
    for (Index j = 0; j < k; ++j) {
      const Index row = i * k + j;
      const double center = stable_sigmoid(tape.gates(row, 0));
      const double neighbor = stable_sigmoid(tape.gates(row, 1));
      d_in.row(i) += center * d_expanded.row(row);
      d_in.row(nn(i, j)) += neighbor * d_expanded.row(row);
      d_gates(row, 0) = d_expanded.row(row).dot(tape.in.row(i)) * center * (1.0 - center);
      d_gates(row, 1) =
          d_expanded.row(row).dot(tape.in.row(nn(i, j))) * neighbor * (1.0 - neighbor);
    }

  // Gate MLP backward (rectifier between the two layers).
  const Eigen::MatrixXd hidden = tape.hidden_pre.cwiseMax(0.0);
  Eigen::MatrixXd d_hidden = linear_backward(hidden, stage.interp_gates, d_gates, grad.interp_gates);
  d_hidden.array() *= (tape.hidden_pre.array() > 0.0).cast<double>();
  const Eigen::MatrixXd d_pair =
      linear_backward(tape.pair, stage.interp_hidden, d_hidden, grad.interp_hidden);
  for (Index i = 0; i < tape.in.rows(); ++i)
    for (Index j = 0; j < k; ++j) {
      const Index row = i * k + j;
      d_in.row(nn(i, j)) += d_pair.row(row).head(c);
      d_in.row(i) += d_pair.row(row).tail(c);
    }
  return d_in;
}

// Full forward pass with every intermediate the backward pass reads.
struct Tape {
  NeighborTable nn;
  Eigen::MatrixXd lift_pre;  // N×c pre-activation of the lifter
  FeatureMap x;              // lifted features
  StageTape s1;
  Eigen::MatrixXd reshaped;  // N×(k·c)
  FeatureMap x2;             // compressed minus lifted
  StageTape s2;
  Eigen::MatrixXd selected;  // (rate·N)×c rows entering the head
  Eigen::MatrixXd head_pre;
};

Points forward_tape(const Points& cloud, Index rate, const NeuParams& params, Tape& tape) {
  validate_params(params);
  const Index n = cloud.rows();
  const Index c = params.dims.width;
  const Index k = params.dims.neighbors;
  require(n >= 1, "upsampler: empty cloud");
  require_finite(cloud, "upsampler input");
  require(rate >= 1, "upsampler: rate must be positive");
  require(rate <= k, "upsampler: rate exceeds the neighbor count of the parameters");
  require(k <= n, "upsampler: cloud smaller than the neighbor count");

  tape.nn = knn_all(cloud, k, /*include_self=*/true);
  tape.lift_pre = linear_forward(cloud, params.lift_hidden);
  tape.x = linear_forward(tape.lift_pre.cwiseMax(0.0), params.lift_out);

  stage_forward(params.stage1, tape.x, tape.nn, tape.s1);
  tape.reshaped.resize(n, k * c);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j)
      tape.reshaped.row(i).segment(j * c, c) = tape.s1.fused.row(i * k + j);
  tape.x2 = linear_forward(tape.reshaped, params.compress) - tape.x;
  stage_forward(params.stage2, tape.x2, tape.nn, tape.s2);

  tape.selected.resize(rate * n, c);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < rate; ++j)
      tape.selected.row(i * rate + j) = tape.s2.fused.row(i * k + j);
  tape.head_pre = linear_forward(tape.selected, params.head_hidden);
  return linear_forward(tape.head_pre.cwiseMax(0.0), params.head_out);
}

NeuParams zeroed_like(const NeuParams& params) {
  NeuParams out = params;
  for (Linear* layer : layer_list(out)) {
    layer->weight.setZero();
    layer->bias.setZero();
  }
  return out;
}

}  // namespace

void validate_params(const NeuParams& params) {
  const Index c = params.dims.width;
  const Index k = params.dims.neighbors;
  require(c >= 1, "neu: feature width must be positive");
  require(k >= 1, "neu: neighbor count must be positive");
  check_layer(params.lift_hidden, 3, c, "lift hidden layer");
  check_layer(params.lift_out, c, c, "lift output layer");
  check_stage(params.stage1, c, "stage 1");
  check_layer(params.compress, k * c, c, "compression layer");
  check_stage(params.stage2, c, "stage 2");
  check_layer(params.head_hidden, c, c, "head hidden layer");
  check_layer(params.head_out, c, 3, "head output layer");
}

NeuParams init_params(std::uint64_t seed, const NeuDims& dims) {
  const Index c = dims.width;
  const Index k = dims.neighbors;
  require(c >= 1, "neu: feature width must be positive");
  require(k >= 1, "neu: neighbor count must be positive");

  NeuParams params;
  params.dims = dims;
  params.seed = seed;
  const auto shape = [&](Linear& layer, Index fan_in, Index fan_out) {
    layer.weight.resize(fan_in, fan_out);
    layer.bias = Eigen::RowVectorXd::Zero(fan_out);
  };
  shape(params.lift_hidden, 3, c);
  shape(params.lift_out, c, c);
  for (NeuStage* stage : {&params.stage1, &params.stage2}) {
    shape(stage->interp_hidden, 2 * c, c);
    shape(stage->interp_gates, c, 2);
    shape(stage->query, c + 2, c + 2);
    shape(stage->key, c + 2, c + 2);
    shape(stage->value, c + 2, c + 2);
    shape(stage->fuse, c + 2, c);
  }
  shape(params.compress, k * c, c);
  shape(params.head_hidden, c, c);
  shape(params.head_out, c, 3);

  std::mt19937_64 rng(seed);
  for (Linear* layer : layer_list(params)) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer->fan_in() + layer->fan_out()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index r = 0; r < layer->weight.rows(); ++r)
      for (Index col = 0; col < layer->weight.cols(); ++col) layer->weight(r, col) = u(rng);
  }
  return params;
}

FeatureMap lift_features(const Points& cloud, const NeuParams& params) {
  validate_params(params);
  require(cloud.rows() >= 1, "lift: empty cloud");
  require_finite(cloud, "lift input");
  return linear_forward(linear_forward(cloud, params.lift_hidden).cwiseMax(0.0),
                        params.lift_out);
}

FeatureMap neu_interpolate(const FeatureMap& x, const Points& cloud, Index r,
                           const NeuStage& stage) {
  require(x.rows() == cloud.rows(), "interpolate: features and cloud disagree on size");
  require(r >= 1, "interpolate: neighbor count must be positive");
  require(r <= cloud.rows(), "interpolate: more neighbors than points");
  require(stage.interp_hidden.fan_in() == 2 * x.cols(),
          "interpolate: gate MLP sized for a different feature width");
  StageTape tape;
  interpolate_tape(stage, x, knn_all(cloud, r, /*include_self=*/true), tape);
  return tape.expanded;
}

FeatureMap grid_code_append(const FeatureMap& y, Index r) {
  require(r >= 1, "grid codes: replica count must be positive");
  require(y.rows() % r == 0, "grid codes: row count not divisible by the replica count");
  Eigen::MatrixXd codes(r, 2);
  if (r == 1) {
    codes.setZero();
  } else {
    const Index m = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(r))));
    if (m * m == r) {
      // Row-major m×m grid over [−0.2, 0.2]².
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
          codes.row(a * m + b) << -0.2 + 0.4 * static_cast<double>(a) / (m - 1),
              -0.2 + 0.4 * static_cast<double>(b) / (m - 1);
    } else {
      for (Index j = 0; j < r; ++j)
        codes.row(j) << -0.2 + 0.4 * static_cast<double>(j) / (r - 1), 0.0;
    }
  }
  FeatureMap out(y.rows(), y.cols() + 2);
  for (Index row = 0; row < y.rows(); ++row)
    out.row(row) << y.row(row), codes.row(row % r);
  return out;
}

FeatureMap self_attention(const FeatureMap& y, const NeuStage& stage) {
  require(y.rows() >= 1, "attention: empty feature map");
  require(stage.query.fan_in() == y.cols(),
          "attention: maps sized for a different feature width");
  StageTape tape;
  attention_tape(stage, y, tape);
  return tape.attended;
}

Points upsampler_forward(const Points& cloud, Index rate, const NeuParams& params) {
  Tape tape;
  return forward_tape(cloud, rate, params, tape);
}

NeuParams upsampler_gradient(const Points& cloud, Index rate, const NeuParams& params,
                             const LossTail& tail, double* loss_out) {
  Tape tape;
  const Points out = forward_tape(cloud, rate, params, tape);
  Points d_out = Points::Zero(out.rows(), 3);
  const double loss = tail(out, &d_out);
  if (loss_out != nullptr) *loss_out = loss;
  require(d_out.rows() == out.rows(), "upsampler gradient: loss tail returned a wrong shape");

  const Index n = cloud.rows();
  const Index c = params.dims.width;
  const Index k = params.dims.neighbors;
  NeuParams grad = zeroed_like(params);

  // Coordinate head.
  const Eigen::MatrixXd head_hidden = tape.head_pre.cwiseMax(0.0);
  Eigen::MatrixXd d_head_hidden =
      linear_backward(head_hidden, params.head_out, d_out, grad.head_out);
  d_head_hidden.array() *= (tape.head_pre.array() > 0.0).cast<double>();
  const Eigen::MatrixXd d_selected =
      linear_backward(tape.selected, params.head_hidden, d_head_hidden, grad.head_hidden);

  // Rows past the rate cutoff receive no gradient.
  FeatureMap d_fused2 = FeatureMap::Zero(n * k, c);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < rate; ++j) d_fused2.row(i * k + j) = d_selected.row(i * rate + j);

  const FeatureMap d_x2 = stage_backward(params.stage2, tape.s2, tape.nn, d_fused2, grad.stage2);

  // x2 = compress(reshaped) − x.
  FeatureMap d_x = -d_x2;
  const Eigen::MatrixXd d_reshaped =
      linear_backward(tape.reshaped, params.compress, d_x2, grad.compress);
  FeatureMap d_fused1(n * k, c);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j)
      d_fused1.row(i * k + j) = d_reshaped.row(i).segment(j * c, c);

  d_x += stage_backward(params.stage1, tape.s1, tape.nn, d_fused1, grad.stage1);

  // Lifter.
  const Eigen::MatrixXd lift_hidden = tape.lift_pre.cwiseMax(0.0);
  Eigen::MatrixXd d_lift_hidden = linear_backward(lift_hidden, params.lift_out, d_x, grad.lift_out);
  d_lift_hidden.array() *= (tape.lift_pre.array() > 0.0).cast<double>();
  grad.lift_hidden.weight += cloud.transpose() * d_lift_hidden;
  grad.lift_hidden.bias += d_lift_hidden.colwise().sum();
  return grad;
}

Index param_count(const NeuParams& params) {
  Index total = 0;
  for (const Linear* layer : layer_list(params))
    total += layer->weight.size() + layer->bias.size();
  return total;
}

Eigen::VectorXd flatten_params(const NeuParams& params) {
  Eigen::VectorXd flat(param_count(params));
  Index at = 0;
  for (const Linear* layer : layer_list(params)) {
    for (Index r = 0; r < layer->weight.rows(); ++r)
      for (Index c = 0; c < layer->weight.cols(); ++c) flat[at++] = layer->weight(r, c);
    for (Index c = 0; c < layer->bias.size(); ++c) flat[at++] = layer->bias[c];
  }
  return flat;
}

void set_flat_params(NeuParams& params, const Eigen::VectorXd& flat) {
  require(flat.size() == param_count(params), "neu: flat vector size mismatch");
  Index at = 0;
  for (Linear* layer : layer_list(params)) {
    for (Index r = 0; r < layer->weight.rows(); ++r)
      for (Index c = 0; c < layer->weight.cols(); ++c) layer->weight(r, c) = flat[at++];
    for (Index c = 0; c < layer->bias.size(); ++c) layer->bias[c] = flat[at++];
  }
}

namespace {

constexpr char kMagic[4] = {'N', 'E', 'U', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  // Little-endian, written byte by byte so the format is host-independent.
  for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) {
    const int byte = in.get();
    if (byte < 0) throw DataError("neu params: truncated file");
    v |= static_cast<std::uint32_t>(byte) << (8 * b);
  }
  return v;
}

void write_f64(std::ostream& out, double value) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(value));
  std::memcpy(&bits, &value, sizeof(bits));
  for (int b = 0; b < 8; ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double read_f64(std::istream& in) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    const int byte = in.get();
    if (byte < 0) throw DataError("neu params: truncated file");
    bits |= static_cast<std::uint64_t>(byte) << (8 * b);
  }
  double value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_u32(out, static_cast<std::uint32_t>(m.rows()));
  write_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  const std::uint32_t rows = read_u32(in);
  const std::uint32_t cols = read_u32(in);
  if (rows == 0 || cols == 0) throw DataError("neu params: empty matrix");
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = read_f64(in);
  return m;
}

}  // namespace

void save_params(const NeuParams& params, std::ostream& out) {
  validate_params(params);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  const auto layers = layer_list(params);
  write_u32(out, static_cast<std::uint32_t>(2 * layers.size()));
  for (const Linear* layer : layers) {
    write_matrix(out, layer->weight);
    write_matrix(out, layer->bias);
  }
  if (!out) throw IoError("neu params: write failed");
}

void save_params(const NeuParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("neu params: cannot open for writing: " + path);
  save_params(params, out);
}

NeuParams load_params(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("neu params: bad magic, not a NEUP file");
  if (read_u32(in) != kVersion) throw DataError("neu params: unsupported version");

  NeuParams params;
  const auto layers = layer_list(params);
  if (read_u32(in) != 2 * layers.size()) throw DataError("neu params: wrong matrix count");
  for (Linear* layer : layers) {
    layer->weight = read_matrix(in);
    const Eigen::MatrixXd bias = read_matrix(in);
    if (bias.rows() != 1 || bias.cols() != layer->weight.cols())
      throw DataError("neu params: bias shape does not match its weight");
    layer->bias = bias.row(0);
  }
  params.dims.width = params.lift_hidden.fan_out();
  require(params.dims.width >= 1 && params.compress.fan_in() % params.dims.width == 0,
          "neu params: compression layer incompatible with the feature width");
  params.dims.neighbors = params.compress.fan_in() / params.dims.width;
  validate_params(params);
  return params;
}

NeuParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("neu params: cannot open: " + path);
  return load_params(in);
}

}  // namespace pcup
