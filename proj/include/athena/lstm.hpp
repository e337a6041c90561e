#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace athena {

struct LstmConfig {
  int window = 16;  // input sequence length
  int epochs = 50;
  int batch = 32;
  int hidden = 16;
  int layers = 5;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double early_stop_rel = 1e-5;  // relative improvement threshold
  int early_stop_patience = 5;   // plateau epochs before stopping
};

// Stacked LSTM regressor: scalar sequence in, scalar next-value prediction
// out. Layer 0 consumes the input scalar, layers 1..L-1 consume the previous
// layer's hidden state; the last hidden state is projected to one value.
//
// Gates follow the classic formulation: for z = W * [h_prev, x] + b,
//   f = sigmoid(z_f), i = sigmoid(z_i), o = sigmoid(z_o),
//   c~ = tanh(z_c), C = f*C_prev + i*c~, h = o*tanh(C).
class LstmNetwork {
 public:
  LstmNetwork(int layers, int hidden, int window);  // zero-initialized
  static LstmNetwork random_init(int layers, int hidden, int window,
                                 std::uint64_t seed);

  int layers() const { return layers_; }
  int hidden() const { return hidden_; }
  int window() const { return window_; }

  // Throws ShapeMismatch unless sequence.size() == window().
  double forward(std::span<const double> sequence) const;

  // Forward pass keeping intermediates for backpropagation through time.
  struct Cache {
    std::vector<double> inputs;  // [layer][t][unit], layer 0 width 1
    std::vector<double> f, i, o, ctilde, cell, tanh_cell, h;
    double prediction = 0.0;
  };
  double forward_cached(std::span<const double> sequence, Cache& cache) const;

  // Accumulates dLoss/dparams into grad (same length as parameters()),
  // given dLoss/dprediction for the sample cached in `cache`.
  void backward(const Cache& cache, double dprediction,
                std::vector<double>& grad) const;

  std::span<const double> parameters() const { return params_; }
  std::vector<double>& mutable_parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::string digest() const;  // fnv1a over dims + parameter bytes

 private:
  friend struct LstmLayout;
  int layers_;
  int hidden_;
  int window_;
  std::vector<double> params_;
};

struct TrainStats {
  std::vector<double> epoch_loss;  // training MSE per completed epoch
  int epochs_run = 0;
  bool early_stopped = false;
};

// Sliding windows (stride 1) over the series predict the next value; MSE
// loss, full BPTT gradients, Adam updates. Deterministic for a fixed seed.
// Throws InsufficientData when the series yields no (window, target) pair.
LstmNetwork lstm_train_series(std::span<const double> normalized_series,
                              const LstmConfig& config,
                              TrainStats* stats = nullptr);

}  // namespace athena
