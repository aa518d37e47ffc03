#include "xsection/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "xsection/error.hpp"
#include "xsection/text_io.hpp"

namespace xs::mlp {

std::vector<int> ArchitectureSpec::layer_sizes() const {
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
  sizes.push_back(output_dim);
  return sizes;
}

void ArchitectureSpec::validate() const {
  if (input_dim < 1 || output_dim != 1) throw Error(ErrorKind::InvalidConfig, name + ": bad input/output dims");
  for (int h : hidden_sizes) {
    if (h < 1) throw Error(ErrorKind::InvalidConfig, name + ": hidden sizes must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, name + ": dropout rate must lie in [0, 1)");
  }
}

const std::vector<ArchitectureSpec>& table3_presets() {
  static const std::vector<ArchitectureSpec> presets = [] {
    std::vector<ArchitectureSpec> p;
    auto add = [&](std::string name, std::vector<int> hidden, double dropout) {
      ArchitectureSpec a;
      a.name = std::move(name);
      a.hidden_sizes = std::move(hidden);
      a.dropout_rate = dropout;
      p.push_back(std::move(a));
    };
    add("DNN8_1", {100, 100, 50, 50, 10, 10}, 0.5);
    add("DNN8_2", {100, 100, 70, 70, 50, 50}, 0.5);
    add("DNN8_3", {120, 120, 70, 70, 20, 20}, 0.5);
    add("DNN8_4", {120, 120, 80, 80, 40, 40}, 0.5);
    add("DNN5_1", {100, 50, 10}, 0.5);
    add("DNN5_2", {100, 70, 50}, 0.5);
    add("DNN5_3", {120, 70, 20}, 0.5);
    add("DNN5_4", {120, 80, 40}, 0.5);
    add("NN3_DO_1", {244}, 0.5);
    add("NN3_DO_2", {322}, 0.5);
    add("NN3_DO_3", {354}, 0.5);
    add("NN3_DO_4", {399}, 0.5);
    add("NN3_1", {70}, 0.0);
    add("NN3_2", {80}, 0.0);
    add("NN3_3", {100}, 0.0);
    add("NN3_4", {120}, 0.0);
    return p;
  }();
  return presets;
}

const ArchitectureSpec& find_preset(const std::string& name) {
  for (const auto& a : table3_presets()) {
    if (a.name == name) return a;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown network preset '" + name + "'");
}

std::size_t param_count(const ArchitectureSpec& arch) {
  const auto sizes = arch.layer_sizes();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    total += static_cast<std::size_t>(sizes[l]) * static_cast<std::size_t>(sizes[l + 1]) +
             static_cast<std::size_t>(sizes[l + 1]);
  }
  return total;
}

std::size_t NetworkState::scalar_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

NetworkState init_network(const ArchitectureSpec& arch, std::uint64_t seed) {
  arch.validate();
  NetworkState net;
  net.arch = arch;
  net.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto sizes = arch.layer_sizes();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double sigma = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_in, fan_out);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        double z = normal(rng);
        while (std::abs(z) > 2.0) z = normal(rng);
        w(r, c) = z * sigma;
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    net.m_weights.push_back(Eigen::MatrixXd::Zero(fan_in, fan_out));
    net.v_weights.push_back(Eigen::MatrixXd::Zero(fan_in, fan_out));
    net.m_biases.push_back(Eigen::VectorXd::Zero(fan_out));
    net.v_biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

ForwardCache forward(const NetworkState& net, const Eigen::MatrixXd& batch, Mode mode, std::mt19937_64* rng) {
  if (batch.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "empty batch");
  if (batch.cols() != net.arch.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                                                  std::to_string(net.arch.input_dim));
  }
  const bool drop = mode == Mode::Train && net.arch.dropout_rate > 0.0;
  if (drop && !rng) throw Error(ErrorKind::InvalidConfig, "train-mode dropout needs an rng");
  const double keep = 1.0 - net.arch.dropout_rate;

  ForwardCache cache;
  cache.step = net.step;
  cache.activations.push_back(batch);
  const std::size_t n_layers = net.weights.size();
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    Eigen::MatrixXd z = cache.activations.back() * net.weights[l];
    z.rowwise() += net.biases[l].transpose();
    Eigen::MatrixXd h = z.array().tanh().matrix();
    if (drop) {
      Eigen::MatrixXd mask(h.rows(), h.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c) {
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
      }
      cache.activations.push_back(h.cwiseProduct(mask));
      cache.masks.push_back(std::move(mask));
    } else {
      cache.activations.push_back(h);
    }
    cache.tanh_out.push_back(std::move(h));
  }
  Eigen::MatrixXd out = cache.activations.back() * net.weights.back();
  out.rowwise() += net.biases.back().transpose();
  cache.output = out.col(0);
  return cache;
}

double mse_loss(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets) {
  if (predictions.size() != targets.size() || predictions.size() == 0) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(targets.size()) + " targets");
  }
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

Gradients backward(const NetworkState& net, const ForwardCache& cache, const Eigen::VectorXd& targets) {
  if (cache.step != net.step || cache.activations.size() != net.weights.size()) {
    throw Error(ErrorKind::StaleCache, "forward cache does not belong to the current network state");
  }
  if (targets.size() != cache.output.size()) {
    throw Error(ErrorKind::LengthMismatch, "targets do not match cached batch");
  }
  const auto n = static_cast<double>(targets.size());
  const std::size_t n_layers = net.weights.size();
  Gradients g;
  g.weights.resize(n_layers);
  g.biases.resize(n_layers);

  Eigen::MatrixXd delta = (2.0 / n) * (cache.output - targets);  // B x 1
  for (std::size_t l = n_layers; l-- > 0;) {
    g.weights[l] = cache.activations[l].transpose() * delta;
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd upstream = delta * net.weights[l].transpose();
    const auto& h = cache.tanh_out[l - 1];
    Eigen::ArrayXXd local = 1.0 - h.array().square();
    if (!cache.masks.empty()) local *= cache.masks[l - 1].array();
    delta = (upstream.array() * local).matrix();
  }
  return g;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "Adam moments must lie in [0, 1) and epsilon > 0");
  }
}

void adam_step(NetworkState& net, const Gradients& grads, const TrainConfig& config) {
  if (grads.weights.size() != net.weights.size() || grads.biases.size() != net.biases.size()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient layer count differs from network");
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (grads.weights[l].rows() != net.weights[l].rows() || grads.weights[l].cols() != net.weights[l].cols() ||
        grads.biases[l].size() != net.biases[l].size()) {
      throw Error(ErrorKind::ShapeMismatch, "gradient shape differs at layer " + std::to_string(l));
    }
  }
  ++net.step;
  const double t = static_cast<double>(net.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
  };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    update(net.weights[l], net.m_weights[l], net.v_weights[l], grads.weights[l]);
    update(net.biases[l], net.m_biases[l], net.v_biases[l], grads.biases[l]);
  }
}

TrainResult train(NetworkState& net, const TrainingSet& data, const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw Error(ErrorKind::EmptyTrainingSet, "no training examples");
  if (data.features.cols() != net.arch.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "training features have wrong width");
  }
  std::vector<MonthBlock> blocks;
  for (const auto& b : data.months) {
    if (b.count > 0) blocks.push_back(b);
  }
  if (blocks.empty()) blocks.push_back({data.fit_month, 0, data.size()});

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.initial_mse = mse_loss(predict(net, data.features), data.targets);
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t k : order) {
      const auto& b = blocks[k];
      const auto begin = static_cast<Eigen::Index>(b.begin);
      const auto count = static_cast<Eigen::Index>(b.count);
      const Eigen::MatrixXd x = data.features.middleRows(begin, count);
      const Eigen::VectorXd y = data.targets.segment(begin, count);
      auto cache = forward(net, x, Mode::Train, &rng);
      loss_sum += mse_loss(cache.output, y);
      adam_step(net, backward(net, cache, y), config);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(blocks.size()));
  }
  result.final_mse = mse_loss(predict(net, data.features), data.targets);
  return result;
}

Eigen::VectorXd predict(const NetworkState& net, const Eigen::MatrixXd& features) {
  return forward(net, features, Mode::Infer).output;
}

namespace {

constexpr const char* kMagic = "xsection-mlp";
constexpr int kFormatVersion = 1;

void write_matrix(std::ostream& out, const char* tag, std::size_t layer, const Eigen::MatrixXd& m) {
  out << tag << ' ' << layer << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw Error(ErrorKind::Parse, "truncated model stream");
  auto v = parse_double(tok);
  if (!v) throw Error(ErrorKind::Parse, "bad number '" + tok + "' in model stream");
  return *v;
}

void expect(std::istream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word) throw Error(ErrorKind::Parse, "expected '" + word + "' in model stream");
}

Eigen::MatrixXd read_matrix(std::istream& in, const char* tag, std::size_t layer) {
  expect(in, tag);
  std::size_t idx = 0;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> idx >> rows >> cols) || idx != layer) throw Error(ErrorKind::Parse, "bad matrix header");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_double(in);
  }
  return m;
}

}  // namespace

void save(const NetworkState& net, std::ostream& out) {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "name " << net.arch.name << '\n';
  out << "hidden " << net.arch.hidden_sizes.size();
  for (int h : net.arch.hidden_sizes) out << ' ' << h;
  out << '\n';
  out << "dropout " << format_double(net.arch.dropout_rate) << '\n';
  out << "input " << net.arch.input_dim << '\n';
  out << "seed " << net.seed << '\n';
  out << "step " << net.step << '\n';
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    write_matrix(out, "W", l, net.weights[l]);
    write_matrix(out, "b", l, net.biases[l]);
    write_matrix(out, "mW", l, net.m_weights[l]);
    write_matrix(out, "vW", l, net.v_weights[l]);
    write_matrix(out, "mb", l, net.m_biases[l]);
    write_matrix(out, "vb", l, net.v_biases[l]);
  }
}

NetworkState load(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw Error(ErrorKind::Parse, "not an mlp model stream");
  if (version != kFormatVersion) throw Error(ErrorKind::Parse, "unsupported mlp format version " + std::to_string(version));
  NetworkState net;
  expect(in, "name");
  in >> net.arch.name;
  expect(in, "hidden");
  std::size_t n_hidden = 0;
  in >> n_hidden;
  net.arch.hidden_sizes.resize(n_hidden);
  for (auto& h : net.arch.hidden_sizes) in >> h;
  expect(in, "dropout");
  net.arch.dropout_rate = read_double(in);
  expect(in, "input");
  in >> net.arch.input_dim;
  expect(in, "seed");
  in >> net.seed;
  expect(in, "step");
  in >> net.step;
  if (!in) throw Error(ErrorKind::Parse, "bad mlp header");
  net.arch.validate();
  const auto sizes = net.arch.layer_sizes();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    net.weights.push_back(read_matrix(in, "W", l));
    net.biases.push_back(read_matrix(in, "b", l).col(0));
    net.m_weights.push_back(read_matrix(in, "mW", l));
    net.v_weights.push_back(read_matrix(in, "vW", l));
    net.m_biases.push_back(read_matrix(in, "mb", l).col(0));
    net.v_biases.push_back(read_matrix(in, "vb", l).col(0));
    if (net.weights[l].rows() != sizes[l] || net.weights[l].cols() != sizes[l + 1]) {
      throw Error(ErrorKind::ShapeMismatch, "stored weights do not match architecture");
    }
  }
  return net;
}

}  // namespace xs::mlp
