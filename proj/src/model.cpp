#include "cubedn/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <json.hpp>

namespace cubedn::model {

using json = nlohmann::json;

std::size_t NetworkSpec::decoder_width(std::size_t level) const {
  return level == 0 ? channels.at(0) : channels.at(level - 1);
}

std::size_t NetworkSpec::encoder_width(std::size_t level) const {
  return level == 0 ? in_channels : channels.at(level - 1);
}

void NetworkSpec::validate() const {
  auto bad = [](const std::string& what) {
    fail(ErrorCode::SpecMismatch, "network spec: " + what);
  };
  if (in_channels == 0 || num_classes == 0) bad("zero channels");
  if (channels.empty()) bad("at least one encoder stage is required");
  for (auto c : channels) {
    if (c == 0) bad("zero stage width");
  }
  if (kernel % 2 == 0 || skip_kernel % 2 == 0) bad("kernel sizes must be odd");
  const std::size_t div = std::size_t{1} << stages();
  if (grid.r == 0 || grid.a == 0 || grid.e == 0 || grid.r % div || grid.a % div || grid.e % div) {
    bad("grid (" + std::to_string(grid.r) + "," + std::to_string(grid.a) + "," +
        std::to_string(grid.e) + ") not divisible by 2^" + std::to_string(stages()));
  }
}

std::string NetworkSpec::to_json() const {
  json j = {{"in_channels", in_channels},
            {"grid", {grid.r, grid.a, grid.e}},
            {"channels", channels},
            {"kernel", kernel},
            {"skip_kernel", skip_kernel},
            {"num_classes", num_classes}};
  return j.dump();
}

NetworkSpec NetworkSpec::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    for (const auto& [key, _] : j.items()) {
      static const std::vector<std::string> known{"in_channels", "grid",        "channels",
                                                  "kernel",      "skip_kernel", "num_classes"};
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        fail(ErrorCode::Config, "unknown key '" + key + "' in network spec");
      }
    }
    NetworkSpec spec;
    spec.in_channels = j.value("in_channels", spec.in_channels);
    if (j.contains("grid")) {
      const auto g = j.at("grid").get<std::vector<std::size_t>>();
      if (g.size() != 3) fail(ErrorCode::Config, "network grid must have 3 entries");
      spec.grid = {g[0], g[1], g[2]};
    }
    spec.channels = j.value("channels", spec.channels);
    spec.kernel = j.value("kernel", spec.kernel);
    spec.skip_kernel = j.value("skip_kernel", spec.skip_kernel);
    spec.num_classes = j.value("num_classes", spec.num_classes);
    return spec;
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("malformed network spec: ") + e.what());
  }
}

namespace {

std::size_t enc_param(std::size_t i) { return 2 * i; }
std::size_t dec_param(std::size_t s, std::size_t j) { return 2 * s + 2 * j; }
std::size_t skip_param(std::size_t s, std::size_t j) { return 4 * s + 2 * j; }
std::size_t head_param(std::size_t s) { return 6 * s; }

std::vector<double>& scale(std::vector<double>& v, double s) {
  for (auto& x : v) x *= s;
  return v;
}

}  // namespace

struct Network::Trace {
  std::vector<const layers::Volume*> e;  // e[0] is the caller's input
  std::vector<layers::Volume> e_store;
  std::vector<layers::Volume> up;        // up[j] = upsample(d[j+1])
  std::vector<layers::Volume> d;         // d[0..S-1]; d[S] aliases e[S]
  layers::Volume out;
};

Network::Network(NetworkSpec spec, std::vector<Param> params, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed), params_(std::move(params)) {
  spec_.validate();
  const std::size_t s = spec_.stages();
  for (std::size_t i = 0; i < s; ++i) {
    encoders_.push_back({spec_.encoder_width(i), spec_.encoder_width(i + 1), spec_.kernel, 2});
  }
  for (std::size_t j = 0; j < s; ++j) {
    const std::size_t in = j + 1 == s ? spec_.encoder_width(s) : spec_.decoder_width(j + 1);
    decoders_.push_back({in, spec_.decoder_width(j), spec_.kernel, 1});
    skips_.push_back({spec_.encoder_width(j), spec_.decoder_width(j), spec_.skip_kernel, 1});
  }
  head_ = {spec_.decoder_width(0), spec_.num_classes, 1, 1};

  std::vector<std::pair<std::string, Shape>> expected;
  auto add = [&](const std::string& name, const layers::Conv3d& conv) {
    expected.emplace_back(name + ".weight", conv.weight_shape());
    expected.emplace_back(name + ".bias", conv.bias_shape());
  };
  for (std::size_t i = 0; i < s; ++i) add("enc" + std::to_string(i + 1), encoders_[i]);
  for (std::size_t j = 0; j < s; ++j) add("dec" + std::to_string(j), decoders_[j]);
  for (std::size_t j = 0; j < s; ++j) add("skip" + std::to_string(j), skips_[j]);
  add("head", head_);

  if (params_.empty()) {
    for (auto& [name, shape] : expected) {
      params_.push_back({name, shape, std::vector<double>(shape_size(shape), 0.0)});
    }
    return;
  }
  if (params_.size() != expected.size()) {
    fail(ErrorCode::SpecMismatch, "expected " + std::to_string(expected.size()) +
                                      " parameter tensors, got " + std::to_string(params_.size()));
  }
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const auto& p = params_[k];
    if (p.name != expected[k].first || p.shape != expected[k].second ||
        p.value.size() != shape_size(p.shape)) {
      fail(ErrorCode::SpecMismatch, "parameter '" + p.name + "' " + shape_string(p.shape) +
                                        " does not match expected '" + expected[k].first + "' " +
                                        shape_string(expected[k].second));
    }
    for (double v : p.value) {
      if (!std::isfinite(v)) fail(ErrorCode::SpecMismatch, "non-finite value in '" + p.name + "'");
    }
  }
}

Network::Network(NetworkSpec spec, std::uint64_t seed) : Network(std::move(spec), {}, seed) {
  std::mt19937_64 rng(seed);
  auto init = [&](Param& w, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : w.value) v = dist(rng);
  };
  const std::size_t s = spec_.stages();
  for (std::size_t i = 0; i < s; ++i) init(params_[enc_param(i)], encoders_[i].fan_in());
  for (std::size_t j = 0; j < s; ++j) init(params_[dec_param(s, j)], decoders_[j].fan_in());
  for (std::size_t j = 0; j < s; ++j) init(params_[skip_param(s, j)], skips_[j].fan_in());
  init(params_[head_param(s)], head_.fan_in());
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients Network::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.size(), 0.0);
  return g;
}

void Network::check_input(const Tensor<double>& input) const {
  const Shape want{spec_.in_channels, spec_.grid.r, spec_.grid.a, spec_.grid.e};
  if (input.shape() != want) {
    fail(ErrorCode::ShapeMismatch, "network input " + shape_string(input.shape()) +
                                       " does not match spec " + shape_string(want));
  }
}

Tensor<double> Network::run(const Tensor<double>& input, Trace* trace) const {
  check_input(input);
  const std::size_t s = spec_.stages();
  auto w = [&](std::size_t k) { return std::span<const double>(params_[k].value); };

  std::vector<layers::Volume> e(s + 1);
  const layers::Volume* prev = &input;
  for (std::size_t i = 0; i < s; ++i) {
    e[i + 1] = encoders_[i].forward(*prev, w(enc_param(i)), w(enc_param(i) + 1));
    layers::relu_inplace(e[i + 1]);
    prev = &e[i + 1];
  }
  auto enc = [&](std::size_t j) -> const layers::Volume& { return j == 0 ? input : e[j]; };

  std::vector<layers::Volume> up(s), d(s);
  for (std::size_t jj = s; jj-- > 0;) {
    const layers::Volume& below = jj + 1 == s ? e[s] : d[jj + 1];
    up[jj] = layers::upsample2(below);
    layers::Volume y = decoders_[jj].forward(up[jj], w(dec_param(s, jj)), w(dec_param(s, jj) + 1));
    layers::add_inplace(y, skips_[jj].forward(enc(jj), w(skip_param(s, jj)), w(skip_param(s, jj) + 1)));
    layers::relu_inplace(y);
    d[jj] = std::move(y);
  }
  layers::Volume out = head_.forward(d[0], w(head_param(s)), w(head_param(s) + 1));
  layers::sigmoid_inplace(out);

  if (trace) {
    trace->e_store = std::move(e);
    trace->e.assign(s + 1, nullptr);
    trace->e[0] = &input;
    for (std::size_t i = 1; i <= s; ++i) trace->e[i] = &trace->e_store[i];
    trace->up = std::move(up);
    trace->d = std::move(d);
    trace->out = out;
  }
  return out;
}

Tensor<double> Network::forward(const Tensor<double>& input) const { return run(input, nullptr); }

labels::ConfidenceCube Network::predict(const fusion::FusedCube& cube) const {
  labels::ConfidenceCube out;
  out.data = forward(cube.data);
  return out;
}

double Network::backward(const Tensor<double>& input, const Tensor<double>& target,
                         Gradients& grads) const {
  if (grads.size() != params_.size()) {
    fail(ErrorCode::ShapeMismatch, "gradient buffer does not match network parameters");
  }
  Trace t;
  const Tensor<double> out = run(input, &t);
  const double value = layers::mse(out, target);
  const std::size_t s = spec_.stages();
  auto w = [&](std::size_t k) { return std::span<const double>(params_[k].value); };
  auto g = [&](std::size_t k) { return std::span<double>(grads[k]); };

  layers::Volume grad = layers::sigmoid_backward(out, layers::mse_gradient(out, target));
  layers::Volume grad_d =
      head_.backward(t.d[0], grad, w(head_param(s)), g(head_param(s)), g(head_param(s) + 1));

  std::vector<layers::Volume> grad_e(s + 1);
  auto accumulate = [](layers::Volume& acc, layers::Volume x) {
    if (acc.empty()) {
      acc = std::move(x);
    } else {
      layers::add_inplace(acc, x);
    }
  };

  for (std::size_t j = 0; j < s; ++j) {
    const layers::Volume pre = layers::relu_backward(t.d[j], std::move(grad_d));
    auto from_skip = skips_[j].backward(*t.e[j], pre, w(skip_param(s, j)), g(skip_param(s, j)),
                                        g(skip_param(s, j) + 1), j > 0);
    if (j > 0) accumulate(grad_e[j], std::move(from_skip));
    auto from_up = decoders_[j].backward(t.up[j], pre, w(dec_param(s, j)), g(dec_param(s, j)),
                                         g(dec_param(s, j) + 1));
    grad_d = layers::upsample2_backward(from_up);
  }
  accumulate(grad_e[s], std::move(grad_d));

  for (std::size_t i = s; i >= 1; --i) {
    const layers::Volume pre = layers::relu_backward(*t.e[i], std::move(grad_e[i]));
    auto gin = encoders_[i - 1].backward(*t.e[i - 1], pre, w(enc_param(i - 1)),
                                         g(enc_param(i - 1)), g(enc_param(i - 1) + 1), i > 1);
    if (i > 1) accumulate(grad_e[i - 1], std::move(gin));
  }
  return value;
}

double loss(const labels::ConfidenceCube& pred, const labels::ConfidenceCube& gt) {
  return layers::mse(pred.data, gt.data);
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::Config, "train config: " + what); };
  if (!(learning_rate > 0)) bad("learning rate must be > 0");
  if (!(momentum >= 0 && momentum < 1)) bad("momentum must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) bad("beta2 must lie in [0, 1)");
  if (!(epsilon > 0)) bad("epsilon must be > 0");
  if (batch_size == 0) bad("batch size must be >= 1");
  if (!(validation_split >= 0 && validation_split < 1)) bad("validation split must lie in [0, 1)");
  if (!(final_lr_fraction > 0 && final_lr_fraction <= 1)) bad("final lr fraction must lie in (0, 1]");
}

double epoch_learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.epochs <= 1 || cfg.final_lr_fraction == 1.0) return cfg.learning_rate;
  const double progress = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  const double f = cfg.final_lr_fraction;
  return cfg.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

TrainResult train(const Dataset& data, const NetworkSpec& spec, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.size() == 0) fail(ErrorCode::InvalidArgument, "training dataset is empty");

  TrainResult result;
  result.network = std::make_unique<Network>(spec, cfg.seed);
  Network& net = *result.network;
  const std::size_t head_bias = head_param(spec.stages()) + 1;
  for (auto& b : net.params()[head_bias].value) b = cfg.head_bias_init;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(
      std::floor(cfg.validation_split * static_cast<double>(data.size())));
  if (n_val >= data.size()) fail(ErrorCode::InvalidArgument, "validation split leaves no training data");
  std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  std::vector<std::size_t> trn(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));

  Gradients velocity = net.zero_gradients();
  Gradients second = net.zero_gradients();
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(trn.begin(), trn.end(), rng);
    const double lr = epoch_learning_rate(cfg, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < trn.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(trn.size(), start + cfg.batch_size);
      Gradients grads = net.zero_gradients();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const Sample sample = data.get(trn[k]);
        batch_loss += net.backward(sample.input, sample.target, grads);
      }
      if (!std::isfinite(batch_loss)) {
        fail(ErrorCode::DivergenceDetected,
             "loss became non-finite in epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += batch_loss;
      const double inv = 1.0 / static_cast<double>(stop - start);
      ++step;
      auto& params = net.params();
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& value = params[p].value;
        auto& g = scale(grads[p], inv);
        auto& m = velocity[p];
        if (cfg.optimizer == Optimizer::Sgd) {
          for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = cfg.momentum * m[i] + g[i];
            value[i] -= lr * m[i];
          }
        } else {
          auto& v = second[p];
          const double c1 = 1.0 - std::pow(cfg.momentum, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
          for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = cfg.momentum * m[i] + (1.0 - cfg.momentum) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
          }
        }
      }
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = epoch_loss / static_cast<double>(trn.size());
    stats.validation_loss = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) {
      double vl = 0.0;
      for (auto idx : val) {
        const Sample sample = data.get(idx);
        vl += layers::mse(net.forward(sample.input), sample.target);
      }
      stats.validation_loss = vl / static_cast<double>(val.size());
      if (!std::isfinite(stats.validation_loss)) {
        fail(ErrorCode::DivergenceDetected, "validation loss became non-finite");
      }
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(net, stats);
  }
  return result;
}

}  // namespace cubedn::model
