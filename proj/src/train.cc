// SPDX-License-Identifier: Apache-2.0
#include "gencomp/train.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "gencomp/error.h"
#include "json.hpp"

namespace gencomp {

using nlohmann::json;

std::string_view LrScheduleName(LrSchedule s) { return s == LrSchedule::kCosine ? "cosine" : "constant"; }

LrSchedule ParseLrSchedule(std::string_view name) {
  if (name == "constant") return LrSchedule::kConstant;
  if (name == "cosine") return LrSchedule::kCosine;
  throw ConfigError("unknown lr schedule: " + std::string(name));
}

double LrScale(LrSchedule s, int step, int total, int warmup) {
  if (step < warmup) return static_cast<double>(step + 1) / warmup;
  if (s == LrSchedule::kConstant || total <= warmup) return 1.0;
  const double frac = static_cast<double>(step - warmup) / (total - warmup);
  return 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void TrainConfig::Validate() const {
  model.Validate();
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam.lr > 0)) throw ConfigError("learning rate must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("adam betas must lie in [0,1)");
  }
  if (!(adam.eps > 0)) throw ConfigError("adam eps must be > 0");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
  if (log_every < 0) throw ConfigError("log_every must be >= 0");
  if (!(ema_decay >= 0 && ema_decay < 1)) throw ConfigError("ema_decay must lie in [0,1)");
  if (!(blank_fg_prob >= 0 && blank_fg_prob <= 1)) throw ConfigError("blank_fg_prob must lie in [0,1]");
  if (!(augment.gamma_min > 0 && augment.gamma_min <= augment.gamma_max)) {
    throw ConfigError("gamma range must satisfy 0 < min <= max");
  }
  if (!(augment.inflate_sigma > 0)) throw ConfigError("inflate_sigma must be > 0");
  if (!(augment.inflate_threshold > 0 && augment.inflate_threshold < 1)) {
    throw ConfigError("inflate_threshold must lie in (0,1)");
  }
}

std::string TrainConfig::ToJson() const {
  json j;
  j["model"] = json::parse(model.ToJson());
  j["ablation"] = VariantName(model.variant);
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["lr"] = adam.lr;
  j["beta1"] = adam.beta1;
  j["beta2"] = adam.beta2;
  j["adam_eps"] = adam.eps;
  j["grad_clip"] = adam.grad_clip;
  j["lr_schedule"] = LrScheduleName(lr_schedule);
  j["warmup_steps"] = warmup_steps;
  j["seed"] = seed;
  j["log_every"] = log_every;
  j["schedule"] = ScheduleKindName(schedule);
  j["inflate_sigma"] = augment.inflate_sigma;
  j["inflate_threshold"] = augment.inflate_threshold;
  j["gamma_min"] = augment.gamma_min;
  j["gamma_max"] = augment.gamma_max;
  j["ema_decay"] = ema_decay;
  j["blank_fg_prob"] = blank_fg_prob;
  return j.dump(2);
}

TrainConfig TrainConfig::FromJson(const std::string& text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    if (j.contains("model")) c.model = ModelConfig::FromJson(j.at("model").dump());
    if (j.contains("ablation")) c.model.variant = ParseVariant(j.at("ablation").get<std::string>());
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("adam_eps", c.adam.eps);
    c.adam.grad_clip = j.value("grad_clip", c.adam.grad_clip);
    if (j.contains("lr_schedule")) c.lr_schedule = ParseLrSchedule(j.at("lr_schedule").get<std::string>());
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.seed = j.value("seed", c.seed);
    c.log_every = j.value("log_every", c.log_every);
    if (j.contains("schedule")) c.schedule = ParseScheduleKind(j.at("schedule").get<std::string>());
    c.augment.inflate_sigma = j.value("inflate_sigma", c.augment.inflate_sigma);
    c.augment.inflate_threshold = j.value("inflate_threshold", c.augment.inflate_threshold);
    c.augment.gamma_min = j.value("gamma_min", c.augment.gamma_min);
    c.augment.gamma_max = j.value("gamma_max", c.augment.gamma_max);
    c.ema_decay = j.value("ema_decay", c.ema_decay);
    c.blank_fg_prob = j.value("blank_fg_prob", c.blank_fg_prob);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.Validate();
  return c;
}

void LossCurve::Append(int step, double loss, double decay) {
  if (!points.empty() && step <= points.back().step) {
    throw ContractViolation("loss curve steps must be strictly increasing");
  }
  const double ema = points.empty() ? loss : decay * points.back().ema + (1.0 - decay) * loss;
  points.push_back({step, loss, ema});
}

double LossCurve::final_ema() const {
  if (points.empty()) throw ContractViolation("empty loss curve");
  return points.back().ema;
}

std::string LossCurve::ToCsv() const {
  std::ostringstream out;
  out.precision(17);
  out << "step,loss,ema\n";
  for (const auto& p : points) out << p.step << ',' << p.loss << ',' << p.ema << '\n';
  return out.str();
}

LossCurve LossCurve::FromCsv(const std::string& text) {
  LossCurve c;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("step,loss,ema", 0) != 0) throw InvalidInput("loss csv: missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossPoint p;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> p.step >> c1 >> p.loss >> c2 >> p.ema) || c1 != ',' || c2 != ',') {
      throw InvalidInput("loss csv: malformed row '" + line + "'");
    }
    c.points.push_back(p);
  }
  return c;
}

template <typename T>
Adam<T>::Adam(const std::vector<NamedParam<T>>& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(ag::Matrix<T>::Zero(p.var->rows(), p.var->cols()));
    v_.push_back(ag::Matrix<T>::Zero(p.var->rows(), p.var->cols()));
  }
}

template <typename T>
double Adam<T>::Step(double lr_scale) {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (p.var->grad.size() != 0) sq += p.var->grad.template cast<double>().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step = static_cast<T>(cfg_.lr * lr_scale / bc1);
  const T eps = static_cast<T>(cfg_.eps);
  const T sqrt_bc2 = static_cast<T>(std::sqrt(bc2));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i].var;
    if (node.grad.size() == 0) continue;
    const ag::Matrix<T> g = node.grad * static_cast<T>(clip);
    m_[i] = b1 * m_[i] + (T(1) - b1) * g;
    v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseProduct(g);
    node.value.array() -= step * m_[i].array() / ((v_[i].array().sqrt() / sqrt_bc2) + eps);
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;

TrainResult Train(const TrainConfig& cfg, std::span<const SampleTriplet> corpus,
                  const BackgroundRenders& backgrounds, const StepCallback& on_step) {
  cfg.Validate();
  if (corpus.empty()) throw InvalidInput("training corpus is empty");
  if (cfg.blank_fg_prob > 0 && backgrounds.size() != corpus.size()) {
    throw InvalidInput("blank-foreground training needs one background render per sample");
  }
  const DiffusionSchedule sched = MakeSchedule(cfg.model.diffusion_steps, cfg.schedule);

  TrainResult result;
  result.model = std::make_unique<DiT<float>>(cfg.model, cfg.seed);
  DiT<float>& model = *result.model;
  Adam<float> adam(model.params(), cfg.adam);
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
  std::uniform_int_distribution<std::size_t> pick_sample(0, corpus.size() - 1);
  std::uniform_int_distribution<int> pick_t(0, sched.steps() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const float seed_grad = 1.0f / static_cast<float>(cfg.batch_size);

  for (int step = 0; step < cfg.steps; ++step) {
    model.ZeroGrad();
    double total = 0.0;
    std::vector<std::size_t> ids;
    std::vector<int> ts;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = pick_sample(rng);
      TrainingExample ex = MakeTrainingExample(corpus[idx], rng, cfg.augment);
      if (cfg.blank_fg_prob > 0 && coin(rng) < cfg.blank_fg_prob) {
        ex.z0 = backgrounds[idx];
        ex.fg = VideoTensor(ex.fg.dims(), ex.fg.channels(), 0.0f);
      }
      const int t = pick_t(rng);
      const VideoTensor eps = GaussianNoise(ex.z0.dims(), ex.z0.channels(), rng);
      const VideoTensor z_t = AddNoise(ex.z0, eps, t, sched);
      ids.push_back(idx);
      ts.push_back(t);

      ag::Tape<float> tape(true);
      auto pred = model.Forward(tape, {&z_t, &ex.masked_video, &ex.mask, &ex.fg, t});
      auto loss = ag::MeanSquaredError(tape, pred, VideoToMatrix<float>(eps));
      const double value = loss->value(0, 0);
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step << " (t=" << t << ", sample=" << idx << ")";
        throw NumericalError(msg.str());
      }
      total += value;
      tape.Backward(loss, seed_grad);
    }
    adam.Step(LrScale(cfg.lr_schedule, step, cfg.steps, cfg.warmup_steps));
    const double mean = total / cfg.batch_size;
    if (!std::isfinite(mean)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (t=";
      for (std::size_t i = 0; i < ts.size(); ++i) msg << (i ? "," : "") << ts[i];
      msg << "; samples=";
      for (std::size_t i = 0; i < ids.size(); ++i) msg << (i ? "," : "") << ids[i];
      msg << ")";
      throw NumericalError(msg.str());
    }
    result.curve.Append(step, mean, cfg.ema_decay);
    if (on_step) on_step(result.curve.points.back());
  }
  return result;
}

VariantStats SummarizeRuns(Variant v, std::vector<double> final_emas) {
  VariantStats s;
  s.variant = v;
  s.final_emas = std::move(final_emas);
  const double n = static_cast<double>(s.final_emas.size());
  if (n == 0) return s;
  s.mean = std::accumulate(s.final_emas.begin(), s.final_emas.end(), 0.0) / n;
  if (n > 1) {
    double ss = 0.0;
    for (double x : s.final_emas) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (n - 1));
  }
  s.std_error = s.stddev / std::sqrt(n);
  return s;
}

double PooledStdError(const VariantStats& a, const VariantStats& b) {
  return std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
}

bool LowerByPooledStdError(const VariantStats& a, const VariantStats& b) {
  return b.mean - a.mean > PooledStdError(a, b);
}

std::string AblationReport::ToJson() const {
  json j;
  j["runs"] = json::array();
  for (const auto& r : runs) {
    j["runs"].push_back({{"variant", VariantName(r.variant)},
                         {"seed", r.seed},
                         {"steps", r.curve.points.size()},
                         {"final_loss", r.curve.points.empty() ? 0.0 : r.curve.points.back().loss},
                         {"final_ema", r.curve.points.empty() ? 0.0 : r.curve.final_ema()}});
  }
  j["variants"] = json::array();
  for (const auto& s : stats) {
    j["variants"].push_back({{"variant", VariantName(s.variant)},
                             {"final_emas", s.final_emas},
                             {"mean", s.mean},
                             {"stddev", s.stddev},
                             {"std_error", s.std_error}});
  }
  return j.dump(2);
}

AblationReport RunAblation(const TrainConfig& base, std::span<const Variant> variants,
                           std::span<const std::uint64_t> seeds,
                           std::span<const SampleTriplet> corpus,
                           const BackgroundRenders& backgrounds, const RunCallback& on_run) {
  AblationReport report;
  for (Variant v : variants) {
    std::vector<double> finals;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.model.variant = v;
      cfg.seed = seed;
      TrainResult result = Train(cfg, corpus, backgrounds);
      AblationRun run{v, seed, result.curve};
      finals.push_back(run.curve.final_ema());
      if (on_run) on_run(run, result);
      report.runs.push_back(std::move(run));
    }
    report.stats.push_back(SummarizeRuns(v, std::move(finals)));
  }
  return report;
}

}  // namespace gencomp
