#include "athena/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "athena/errors.hpp"
#include "athena/util.hpp"

namespace athena {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

enum Gate { kForget = 0, kInput = 1, kOutput = 2, kCand = 3 };

}  // namespace

// Flat parameter layout: per layer [W_f W_i W_o W_c b_f b_i b_o b_c] with
// W gates H x (H + in) row-major and concat order [h_prev, x]; then the
// output head [w_y (H), b_y].
struct LstmLayout {
  int layers;
  int hidden;
  std::vector<std::size_t> layer_offset;
  std::size_t head_offset = 0;
  std::size_t total = 0;

  LstmLayout(int n_layers, int n_hidden) : layers(n_layers), hidden(n_hidden) {
    std::size_t off = 0;
    layer_offset.reserve(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) {
      layer_offset.push_back(off);
      const std::size_t in = input_width(l);
      off += 4u * static_cast<std::size_t>(hidden) *
                 (static_cast<std::size_t>(hidden) + in) +
             4u * static_cast<std::size_t>(hidden);
    }
    head_offset = off;
    total = off + static_cast<std::size_t>(hidden) + 1;
  }

  std::size_t input_width(int layer) const {
    return layer == 0 ? 1 : static_cast<std::size_t>(hidden);
  }
  std::size_t weight(int layer, int gate) const {
    const std::size_t in = input_width(layer);
    return layer_offset[static_cast<std::size_t>(layer)] +
           static_cast<std::size_t>(gate) * static_cast<std::size_t>(hidden) *
               (static_cast<std::size_t>(hidden) + in);
  }
  std::size_t bias(int layer, int gate) const {
    const std::size_t in = input_width(layer);
    return layer_offset[static_cast<std::size_t>(layer)] +
           4u * static_cast<std::size_t>(hidden) *
               (static_cast<std::size_t>(hidden) + in) +
           static_cast<std::size_t>(gate) * static_cast<std::size_t>(hidden);
  }
  std::size_t head_weight() const { return head_offset; }
  std::size_t head_bias() const {
    return head_offset + static_cast<std::size_t>(hidden);
  }
};

LstmNetwork::LstmNetwork(int layers, int hidden, int window)
    : layers_(layers), hidden_(hidden), window_(window) {
  if (layers < 1 || hidden < 1 || window < 1) {
    raise(Errc::kInvalidSpec, "lstm dims must be >= 1");
  }
  params_.assign(LstmLayout(layers, hidden).total, 0.0);
}

LstmNetwork LstmNetwork::random_init(int layers, int hidden, int window,
                                     std::uint64_t seed) {
  LstmNetwork net(layers, hidden, window);
  const LstmLayout layout(layers, hidden);
  Rng rng(seed);
  for (int l = 0; l < layers; ++l) {
    const std::size_t in = layout.input_width(l);
    const double scale =
        1.0 / std::sqrt(static_cast<double>(in) + hidden);
    const std::size_t n_weights =
        4u * static_cast<std::size_t>(hidden) *
        (static_cast<std::size_t>(hidden) + in);
    for (std::size_t i = 0; i < n_weights; ++i) {
      net.params_[layout.weight(l, kForget) + i] = rng.uniform(-scale, scale);
    }
    // Forget-gate bias starts open so early training can carry state.
    for (int u = 0; u < hidden; ++u) {
      net.params_[layout.bias(l, kForget) + static_cast<std::size_t>(u)] = 1.0;
    }
  }
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int u = 0; u < hidden; ++u) {
    net.params_[layout.head_weight() + static_cast<std::size_t>(u)] =
        rng.uniform(-head_scale, head_scale);
  }
  return net;
}

double LstmNetwork::forward_cached(std::span<const double> sequence,
                                   Cache& cache) const {
  if (static_cast<int>(sequence.size()) != window_) {
    raise(Errc::kShapeMismatch,
          "sequence length " + std::to_string(sequence.size()) +
              " != window " + std::to_string(window_));
  }
  const LstmLayout layout(layers_, hidden_);
  const int T = window_;
  const int H = hidden_;
  const std::size_t plane = static_cast<std::size_t>(T) *
                            static_cast<std::size_t>(H);
  const std::size_t cells = static_cast<std::size_t>(layers_) * plane;

  cache.inputs.assign(sequence.begin(), sequence.end());
  cache.f.assign(cells, 0.0);
  cache.i.assign(cells, 0.0);
  cache.o.assign(cells, 0.0);
  cache.ctilde.assign(cells, 0.0);
  cache.cell.assign(cells, 0.0);
  cache.tanh_cell.assign(cells, 0.0);
  cache.h.assign(cells, 0.0);

  auto at = [&](int l, int t, int u) -> std::size_t {
    return static_cast<std::size_t>(l) * plane +
           static_cast<std::size_t>(t) * static_cast<std::size_t>(H) +
           static_cast<std::size_t>(u);
  };

  const double* p = params_.data();
  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < layers_; ++l) {
      const auto in = static_cast<int>(layout.input_width(l));
      const int cols = H + in;
      const double* wf = p + layout.weight(l, kForget);
      const double* wi = p + layout.weight(l, kInput);
      const double* wo = p + layout.weight(l, kOutput);
      const double* wc = p + layout.weight(l, kCand);
      const double* bf = p + layout.bias(l, kForget);
      const double* bi = p + layout.bias(l, kInput);
      const double* bo = p + layout.bias(l, kOutput);
      const double* bc = p + layout.bias(l, kCand);

      for (int u = 0; u < H; ++u) {
        double zf = bf[u], zi = bi[u], zo = bo[u], zc = bc[u];
        const std::size_t row = static_cast<std::size_t>(u) *
                                static_cast<std::size_t>(cols);
        if (t > 0) {
          for (int c = 0; c < H; ++c) {
            const double hp = cache.h[at(l, t - 1, c)];
            zf += wf[row + static_cast<std::size_t>(c)] * hp;
            zi += wi[row + static_cast<std::size_t>(c)] * hp;
            zo += wo[row + static_cast<std::size_t>(c)] * hp;
            zc += wc[row + static_cast<std::size_t>(c)] * hp;
          }
        }
        for (int c = 0; c < in; ++c) {
          const double x = l == 0 ? cache.inputs[static_cast<std::size_t>(t)]
                                  : cache.h[at(l - 1, t, c)];
          const std::size_t col = row + static_cast<std::size_t>(H + c);
          zf += wf[col] * x;
          zi += wi[col] * x;
          zo += wo[col] * x;
          zc += wc[col] * x;
        }
        const double f = sigmoid(zf);
        const double i = sigmoid(zi);
        const double o = sigmoid(zo);
        const double ct = std::tanh(zc);
        const double cprev = t > 0 ? cache.cell[at(l, t - 1, u)] : 0.0;
        const double cell = f * cprev + i * ct;
        const std::size_t idx = at(l, t, u);
        cache.f[idx] = f;
        cache.i[idx] = i;
        cache.o[idx] = o;
        cache.ctilde[idx] = ct;
        cache.cell[idx] = cell;
        cache.tanh_cell[idx] = std::tanh(cell);
        cache.h[idx] = o * cache.tanh_cell[idx];
      }
    }
  }

  double pred = params_[layout.head_bias()];
  for (int u = 0; u < H; ++u) {
    pred += params_[layout.head_weight() + static_cast<std::size_t>(u)] *
            cache.h[at(layers_ - 1, T - 1, u)];
  }
  cache.prediction = pred;
  return pred;
}

double LstmNetwork::forward(std::span<const double> sequence) const {
  Cache cache;
  return forward_cached(sequence, cache);
}

void LstmNetwork::backward(const Cache& cache, double dprediction,
                           std::vector<double>& grad) const {
  const LstmLayout layout(layers_, hidden_);
  const int T = window_;
  const int H = hidden_;
  const std::size_t plane = static_cast<std::size_t>(T) *
                            static_cast<std::size_t>(H);
  auto at = [&](int l, int t, int u) -> std::size_t {
    return static_cast<std::size_t>(l) * plane +
           static_cast<std::size_t>(t) * static_cast<std::size_t>(H) +
           static_cast<std::size_t>(u);
  };
  const double* p = params_.data();

  // dLoss/dh for the current layer, all timesteps; starts with the head.
  std::vector<double> dh_above(plane, 0.0);
  for (int u = 0; u < H; ++u) {
    const double h_last = cache.h[at(layers_ - 1, T - 1, u)];
    grad[layout.head_weight() + static_cast<std::size_t>(u)] +=
        dprediction * h_last;
    dh_above[static_cast<std::size_t>(T - 1) * static_cast<std::size_t>(H) +
             static_cast<std::size_t>(u)] =
        dprediction * p[layout.head_weight() + static_cast<std::size_t>(u)];
  }
  grad[layout.head_bias()] += dprediction;

  std::vector<double> dzf(static_cast<std::size_t>(H));
  std::vector<double> dzi(static_cast<std::size_t>(H));
  std::vector<double> dzo(static_cast<std::size_t>(H));
  std::vector<double> dzc(static_cast<std::size_t>(H));

  for (int l = layers_ - 1; l >= 0; --l) {
    const auto in = static_cast<int>(layout.input_width(l));
    const int cols = H + in;
    const double* wf = p + layout.weight(l, kForget);
    const double* wi = p + layout.weight(l, kInput);
    const double* wo = p + layout.weight(l, kOutput);
    const double* wc = p + layout.weight(l, kCand);

    std::vector<double> dx(static_cast<std::size_t>(T) *
                               static_cast<std::size_t>(in),
                           0.0);
    std::vector<double> dh_rec(static_cast<std::size_t>(H), 0.0);
    std::vector<double> dc_next(static_cast<std::size_t>(H), 0.0);

    for (int t = T - 1; t >= 0; --t) {
      for (int u = 0; u < H; ++u) {
        const std::size_t idx = at(l, t, u);
        const double dh =
            dh_above[static_cast<std::size_t>(t) *
                         static_cast<std::size_t>(H) +
                     static_cast<std::size_t>(u)] +
            dh_rec[static_cast<std::size_t>(u)];
        const double o = cache.o[idx];
        const double tc = cache.tanh_cell[idx];
        const double dout = dh * tc;
        double dc = dc_next[static_cast<std::size_t>(u)] +
                    dh * o * (1.0 - tc * tc);
        const double f = cache.f[idx];
        const double i = cache.i[idx];
        const double ct = cache.ctilde[idx];
        const double cprev = t > 0 ? cache.cell[at(l, t - 1, u)] : 0.0;
        dzf[static_cast<std::size_t>(u)] = dc * cprev * f * (1.0 - f);
        dzi[static_cast<std::size_t>(u)] = dc * ct * i * (1.0 - i);
        dzo[static_cast<std::size_t>(u)] = dout * o * (1.0 - o);
        dzc[static_cast<std::size_t>(u)] = dc * i * (1.0 - ct * ct);
        dc_next[static_cast<std::size_t>(u)] = dc * f;
      }

      // Parameter gradients and the concat gradient.
      for (int u = 0; u < H; ++u) {
        const std::size_t row = static_cast<std::size_t>(u) *
                                static_cast<std::size_t>(cols);
        const double gf = dzf[static_cast<std::size_t>(u)];
        const double gi = dzi[static_cast<std::size_t>(u)];
        const double go = dzo[static_cast<std::size_t>(u)];
        const double gc = dzc[static_cast<std::size_t>(u)];
        if (t > 0) {
          for (int c = 0; c < H; ++c) {
            const double hp = cache.h[at(l, t - 1, c)];
            const std::size_t col = row + static_cast<std::size_t>(c);
            grad[layout.weight(l, kForget) + col] += gf * hp;
            grad[layout.weight(l, kInput) + col] += gi * hp;
            grad[layout.weight(l, kOutput) + col] += go * hp;
            grad[layout.weight(l, kCand) + col] += gc * hp;
          }
        }
        for (int c = 0; c < in; ++c) {
          const double x = l == 0
                               ? cache.inputs[static_cast<std::size_t>(t)]
                               : cache.h[at(l - 1, t, c)];
          const std::size_t col = row + static_cast<std::size_t>(H + c);
          grad[layout.weight(l, kForget) + col] += gf * x;
          grad[layout.weight(l, kInput) + col] += gi * x;
          grad[layout.weight(l, kOutput) + col] += go * x;
          grad[layout.weight(l, kCand) + col] += gc * x;
        }
        grad[layout.bias(l, kForget) + static_cast<std::size_t>(u)] += gf;
        grad[layout.bias(l, kInput) + static_cast<std::size_t>(u)] += gi;
        grad[layout.bias(l, kOutput) + static_cast<std::size_t>(u)] += go;
        grad[layout.bias(l, kCand) + static_cast<std::size_t>(u)] += gc;
      }

      for (int c = 0; c < H; ++c) {
        double acc = 0.0;
        for (int u = 0; u < H; ++u) {
          const std::size_t col = static_cast<std::size_t>(u) *
                                      static_cast<std::size_t>(cols) +
                                  static_cast<std::size_t>(c);
          acc += wf[col] * dzf[static_cast<std::size_t>(u)] +
                 wi[col] * dzi[static_cast<std::size_t>(u)] +
                 wo[col] * dzo[static_cast<std::size_t>(u)] +
                 wc[col] * dzc[static_cast<std::size_t>(u)];
        }
        dh_rec[static_cast<std::size_t>(c)] = acc;
      }
      for (int c = 0; c < in; ++c) {
        double acc = 0.0;
        for (int u = 0; u < H; ++u) {
          const std::size_t col = static_cast<std::size_t>(u) *
                                      static_cast<std::size_t>(cols) +
                                  static_cast<std::size_t>(H + c);
          acc += wf[col] * dzf[static_cast<std::size_t>(u)] +
                 wi[col] * dzi[static_cast<std::size_t>(u)] +
                 wo[col] * dzo[static_cast<std::size_t>(u)] +
                 wc[col] * dzc[static_cast<std::size_t>(u)];
        }
        dx[static_cast<std::size_t>(t) * static_cast<std::size_t>(in) +
           static_cast<std::size_t>(c)] += acc;
      }
    }
    if (l > 0) dh_above = std::move(dx);
  }
}

std::string LstmNetwork::digest() const {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(params_.size() * sizeof(double) + 12);
  auto push_int = [&](int v) {
    for (int b = 0; b < 4; ++b) {
      bytes.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
    }
  };
  push_int(layers_);
  push_int(hidden_);
  push_int(window_);
  const auto* raw = reinterpret_cast<const std::uint8_t*>(params_.data());
  bytes.insert(bytes.end(), raw, raw + params_.size() * sizeof(double));
  return digest_hex(fnv1a64(bytes));
}

LstmNetwork lstm_train_series(std::span<const double> normalized_series,
                              const LstmConfig& config, TrainStats* stats) {
  const auto window = static_cast<std::size_t>(config.window);
  if (normalized_series.size() < window + 1) {
    raise(Errc::kInsufficientData,
          "series yields no training window of length " +
              std::to_string(config.window));
  }
  const std::size_t n_samples = normalized_series.size() - window;

  LstmNetwork net = LstmNetwork::random_init(config.layers, config.hidden,
                                             config.window, config.seed);
  const std::size_t n_params = net.parameter_count();
  std::vector<double> grad(n_params, 0.0);
  std::vector<double> adam_m(n_params, 0.0);
  std::vector<double> adam_v(n_params, 0.0);
  long adam_t = 0;

  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  LstmNetwork::Cache cache;
  double best_loss = std::numeric_limits<double>::infinity();
  int plateau = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n_samples; i > 1; --i) {
      const std::size_t j = shuffle_rng.below(i);
      std::swap(order[i - 1], order[j]);
    }

    double sse = 0.0;
    for (std::size_t start = 0; start < n_samples;
         start += static_cast<std::size_t>(config.batch)) {
      const std::size_t batch =
          std::min(static_cast<std::size_t>(config.batch), n_samples - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t s = 0; s < batch; ++s) {
        const std::size_t idx = order[start + s];
        const std::span<const double> seq =
            normalized_series.subspan(idx, window);
        const double target = normalized_series[idx + window];
        const double pred = net.forward_cached(seq, cache);
        const double err = pred - target;
        sse += err * err;
        net.backward(cache, 2.0 * err / static_cast<double>(batch), grad);
      }

      ++adam_t;
      std::vector<double>& params = net.mutable_parameters();
      const double bc1 = 1.0 - std::pow(config.beta1, adam_t);
      const double bc2 = 1.0 - std::pow(config.beta2, adam_t);
      for (std::size_t i = 0; i < n_params; ++i) {
        adam_m[i] = config.beta1 * adam_m[i] + (1.0 - config.beta1) * grad[i];
        adam_v[i] =
            config.beta2 * adam_v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double m_hat = adam_m[i] / bc1;
        const double v_hat = adam_v[i] / bc2;
        params[i] -=
            config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
      }
    }

    const double loss = sse / static_cast<double>(n_samples);
    if (stats) {
      stats->epoch_loss.push_back(loss);
      stats->epochs_run = epoch + 1;
    }

    const double rel =
        (best_loss - loss) / std::max(std::abs(best_loss), 1e-12);
    if (std::isfinite(best_loss) && rel < config.early_stop_rel) {
      ++plateau;
    } else {
      plateau = 0;
    }
    best_loss = std::min(best_loss, loss);
    if (plateau >= config.early_stop_patience) {
      if (stats) stats->early_stopped = true;
      break;
    }
  }
  return net;
}

}  // namespace athena
