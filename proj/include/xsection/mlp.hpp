#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xsection/preprocess.hpp"

namespace xs::mlp {

struct ArchitectureSpec {
  std::string name;
  std::vector<int> hidden_sizes;
  double dropout_rate = 0.0;  // applied after every hidden activation
  int input_dim = static_cast<int>(kFeatureDim);
  int output_dim = 1;

  int layer_count() const { return static_cast<int>(hidden_sizes.size()) + 2; }
  // input, hidden..., output
  std::vector<int> layer_sizes() const;
  void validate() const;
};

// The sixteen fully-connected patterns: DNN8_1..4, DNN5_1..4, NN3_DO_1..4, NN3_1..4.
const std::vector<ArchitectureSpec>& table3_presets();
// Throws InvalidConfig for unknown names.
const ArchitectureSpec& find_preset(const std::string& name);

std::size_t param_count(const ArchitectureSpec& arch);

struct NetworkState {
  ArchitectureSpec arch;
  std::vector<Eigen::MatrixXd> weights;  // fan_in x fan_out
  std::vector<Eigen::VectorXd> biases;   // fan_out
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  std::int64_t step = 0;
  std::uint64_t seed = 0;

  std::size_t scalar_count() const;  // weights + biases
};

// Zero biases; weights ~ N(0, 1/fan_in) resampled until inside two sigma.
NetworkState init_network(const ArchitectureSpec& arch, std::uint64_t seed);

enum class Mode { Train, Infer };

struct ForwardCache {
  // activations[0] is the input batch; activations[l] is the output of hidden layer l
  // after dropout. tanh_out[l - 1] keeps the pre-dropout value for the derivative.
  std::vector<Eigen::MatrixXd> activations;
  std::vector<Eigen::MatrixXd> tanh_out;
  std::vector<Eigen::MatrixXd> masks;  // scaled keep masks, empty in infer mode
  Eigen::VectorXd output;
  std::int64_t step = -1;  // network step the cache was produced at
};

// `rng` is required in train mode when dropout is active.
ForwardCache forward(const NetworkState& net, const Eigen::MatrixXd& batch, Mode mode,
                     std::mt19937_64* rng = nullptr);

double mse_loss(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Exact gradient of mse_loss with the cached dropout masks held fixed.
Gradients backward(const NetworkState& net, const ForwardCache& cache, const Eigen::VectorXd& targets);

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;  // month shuffling and dropout masks

  void validate() const;
};

void adam_step(NetworkState& net, const Gradients& grads, const TrainConfig& config);

struct TrainResult {
  std::vector<double> epoch_loss;  // mean train-mode minibatch loss per epoch
  double initial_mse = 0.0;        // infer-mode loss before the first update
  double final_mse = 0.0;          // infer-mode loss after the last epoch
};

// One minibatch per window month, month order reshuffled every epoch.
TrainResult train(NetworkState& net, const TrainingSet& data, const TrainConfig& config);

Eigen::VectorXd predict(const NetworkState& net, const Eigen::MatrixXd& features);

void save(const NetworkState& net, std::ostream& out);
NetworkState load(std::istream& in);

}  // namespace xs::mlp
