#include "rdm/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rdm {

AlphaSchedule RunConfig::make_schedule() const {
  if (schedule_family == "linear") return AlphaSchedule::linear(T);
  if (schedule_family == "custom") return AlphaSchedule(alpha);
  throw invalid_config_error("unknown schedule family: " + schedule_family);
}

NoiseDistribution RunConfig::make_noise() const {
  if (noise_kind == "uniform") return NoiseDistribution::uniform(arch.K);
  if (noise_kind == "absorbing")
    return NoiseDistribution::absorbing(arch.K,
                                        mask_id >= 0 ? mask_id : arch.K - 1);
  if (noise_kind == "custom")
    return NoiseDistribution::custom(Categorical(noise_probs));
  throw invalid_config_error("unknown noise kind: " + noise_kind);
}

RoutingStrategy RunConfig::make_strategy() const {
  if (sampling.strategy == "stochastic") return RoutingStrategy::stochastic();
  if (sampling.strategy != "adaptive")
    throw invalid_config_error("unknown strategy: " + sampling.strategy);
  KScheduleKind ks;
  if (sampling.k_schedule == "cosine")
    ks = KScheduleKind::kCosine;
  else if (sampling.k_schedule == "linear")
    ks = KScheduleKind::kLinear;
  else
    throw invalid_config_error("unknown k schedule: " + sampling.k_schedule);
  return RoutingStrategy::adaptive(ks, sampling.gumbel, sampling.conservative);
}

DecodeMode RunConfig::make_mode() const {
  if (sampling.mode == "argmax") return DecodeMode::kArgmax;
  if (sampling.mode == "sample") return DecodeMode::kSample;
  throw invalid_config_error("unknown decode mode: " + sampling.mode);
}

std::vector<int> RunConfig::make_step_list() const {
  if (!sampling.step_list.empty()) return sampling.step_list;
  return make_step_sequence(T, sampling.steps);
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_config_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw invalid_config_error(std::string("config is not valid JSON: ") +
                               e.what());
  }
  RunConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      c.T = s.at("T").get<int>();
      if (s.contains("alpha")) {
        c.schedule_family = "custom";
        c.alpha = s.at("alpha").get<std::vector<double>>();
      } else if (s.contains("family")) {
        c.schedule_family = s.at("family").get<std::string>();
      }
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      c.noise_kind = n.value("kind", c.noise_kind);
      c.mask_id = n.value("mask_id", -1);
      if (n.contains("probs"))
        c.noise_probs = n.at("probs").get<std::vector<double>>();
    }
    if (j.contains("arch")) {
      const auto& a = j.at("arch");
      c.arch.K = a.at("K").get<int>();
      c.arch.N_max = a.at("N_max").get<int>();
      c.arch.embed_dim = a.value("embed_dim", c.arch.embed_dim);
      c.arch.time_dim = a.value("time_dim", c.arch.time_dim);
      c.arch.hidden_dim = a.value("hidden_dim", c.arch.hidden_dim);
      const std::string ctx = a.value("context", std::string("window"));
      if (ctx == "mean_pool")
        c.arch.context = DenoiserArch::Context::kMeanPool;
      else if (ctx == "window")
        c.arch.context = DenoiserArch::Context::kWindow;
      else
        throw invalid_config_error("unknown context kind: " + ctx);
      c.arch.window = a.value("window", c.arch.window);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.scheme = reweighting_scheme_from_name(
          t.value("scheme", std::string("linear")));
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.steps = t.value("steps", c.train.steps);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.warmup_steps = t.value("warmup_steps", c.train.warmup_steps);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.label_smoothing =
          t.value("label_smoothing", c.train.label_smoothing);
      c.train.ema_decay = t.value("ema_decay", c.train.ema_decay);
      c.train.conditioned = t.value("conditioned", c.train.conditioned);
    }
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      c.sampling.steps = s.value("steps", c.sampling.steps);
      if (s.contains("step_list") && !s.at("step_list").is_null())
        c.sampling.step_list = s.at("step_list").get<std::vector<int>>();
      c.sampling.strategy = s.value("strategy", c.sampling.strategy);
      c.sampling.k_schedule = s.value("k_schedule", c.sampling.k_schedule);
      c.sampling.gumbel = s.value("gumbel", c.sampling.gumbel);
      c.sampling.conservative = s.value("conservative", c.sampling.conservative);
      c.sampling.tau = s.value("tau", c.sampling.tau);
      c.sampling.mode = s.value("mode", c.sampling.mode);
      c.sampling.candidates = s.value("candidates", c.sampling.candidates);
      c.sampling.count = s.value("count", c.sampling.count);
      c.sampling.length = s.value("length", c.sampling.length);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      c.corpus_path = d.value("corpus", std::string());
      if (d.contains("source") && !d.at("source").is_null())
        c.source_path = d.at("source").get<std::string>();
    }
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw invalid_config_error(std::string("bad config field: ") + e.what());
  }

  // eager validation so a bad document fails at load, not mid-run
  try {
    c.train.T = c.T;
    c.train.seed = c.seed;
    c.train.validate();
    c.make_schedule();
    if (c.arch.K >= 2) c.make_noise();
    c.make_strategy();
    c.make_mode();
  } catch (const invalid_config_error&) {
    throw;
  } catch (const std::exception& e) {
    throw invalid_config_error(e.what());
  }
  if (!(c.sampling.tau > 0.0))
    throw invalid_config_error("sampling.tau must be > 0");
  if (c.sampling.candidates < 1)
    throw invalid_config_error("sampling.candidates must be >= 1");
  return c;
}

std::string render_run_config(const RunConfig& c) {
  std::string out = "{\n";
  out += "  \"seed\": " + std::to_string(c.seed) + ",\n";
  out += "  \"schedule\": {\"T\": " + std::to_string(c.T);
  if (c.schedule_family == "custom")
    out += ", \"alpha\": " + json_double_array(c.alpha);
  else
    out += ", \"family\": \"" + c.schedule_family + "\"";
  out += "},\n";
  out += "  \"noise\": {\"kind\": \"" + c.noise_kind + "\"";
  if (c.noise_kind == "absorbing")
    out += ", \"mask_id\": " + std::to_string(c.mask_id);
  if (c.noise_kind == "custom")
    out += ", \"probs\": " + json_double_array(c.noise_probs);
  out += "},\n";
  out += "  \"arch\": {\"K\": " + std::to_string(c.arch.K);
  out += ", \"N_max\": " + std::to_string(c.arch.N_max);
  out += ", \"embed_dim\": " + std::to_string(c.arch.embed_dim);
  out += ", \"time_dim\": " + std::to_string(c.arch.time_dim);
  out += ", \"hidden_dim\": " + std::to_string(c.arch.hidden_dim);
  out += ", \"context\": \"" + c.arch.context_name() + "\"";
  out += ", \"window\": " + std::to_string(c.arch.window) + "},\n";
  out += "  \"train\": {\"scheme\": \"" +
         std::string(reweighting_scheme_name(c.train.scheme)) + "\"";
  out += ", \"batch_size\": " + std::to_string(c.train.batch_size);
  out += ", \"steps\": " + std::to_string(c.train.steps);
  out += ", \"learning_rate\": " + format_double(c.train.learning_rate);
  out += ", \"warmup_steps\": " + std::to_string(c.train.warmup_steps);
  out += ", \"weight_decay\": " + format_double(c.train.weight_decay);
  out += ", \"label_smoothing\": " + format_double(c.train.label_smoothing);
  out += ", \"ema_decay\": " + format_double(c.train.ema_decay);
  out += ", \"conditioned\": ";
  out += c.train.conditioned ? "true" : "false";
  out += "},\n";
  out += "  \"sampling\": {\"steps\": " + std::to_string(c.sampling.steps);
  if (!c.sampling.step_list.empty()) {
    out += ", \"step_list\": [";
    for (std::size_t i = 0; i < c.sampling.step_list.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(c.sampling.step_list[i]);
    }
    out += "]";
  }
  out += ", \"strategy\": \"" + c.sampling.strategy + "\"";
  out += ", \"k_schedule\": \"" + c.sampling.k_schedule + "\"";
  out += ", \"gumbel\": ";
  out += c.sampling.gumbel ? "true" : "false";
  out += ", \"conservative\": ";
  out += c.sampling.conservative ? "true" : "false";
  out += ", \"tau\": " + format_double(c.sampling.tau);
  out += ", \"mode\": \"" + c.sampling.mode + "\"";
  out += ", \"candidates\": " + std::to_string(c.sampling.candidates);
  out += ", \"count\": " + std::to_string(c.sampling.count);
  out += ", \"length\": " + std::to_string(c.sampling.length) + "},\n";
  out += "  \"data\": {\"corpus\": \"" + json_escape(c.corpus_path) + "\"";
  out += ", \"source\": ";
  out += c.source_path.empty() ? "null"
                               : "\"" + json_escape(c.source_path) + "\"";
  out += "},\n";
  out += "  \"out_dir\": \"" + json_escape(c.out_dir) + "\"\n";
  out += "}\n";
  return out;
}

EvalMetrics eval_paired(const std::vector<std::vector<int>>& generated,
                        const std::vector<std::vector<int>>& reference) {
  if (generated.size() != reference.size())
    throw std::invalid_argument("eval: row counts differ");
  EvalMetrics m;
  m.paired = true;
  long tokens = 0, correct = 0, exact = 0;
  for (std::size_t r = 0; r < generated.size(); ++r) {
    if (generated[r].size() != reference[r].size())
      throw std::invalid_argument("eval: row lengths differ");
    bool all = true;
    for (std::size_t n = 0; n < generated[r].size(); ++n) {
      ++tokens;
      if (generated[r][n] == reference[r][n])
        ++correct;
      else
        all = false;
    }
    if (all) ++exact;
  }
  m.token_accuracy = tokens ? static_cast<double>(correct) / tokens : 0.0;
  m.exact_match =
      generated.empty() ? 0.0 : static_cast<double>(exact) / generated.size();
  return m;
}

EvalMetrics eval_against_model(const std::vector<std::vector<int>>& generated,
                               const DataModel& model) {
  EvalMetrics m;
  m.paired = false;
  const int K = model.vocab();
  const int N = model.length();
  for (const auto& row : generated) {
    if (static_cast<int>(row.size()) != N)
      throw std::invalid_argument("eval: row length differs from model");
    for (int id : row)
      if (id < 0 || id >= K)
        throw std::invalid_argument("eval: token id outside model vocab");
  }

  // model unigram: mean of position marginals; model bigram: mean over
  // adjacent position pairs of the exact joint
  std::vector<Categorical> marg;
  for (int n = 0; n < N; ++n) marg.push_back(model.position_marginal(n));

  std::vector<double> model_uni(K, 0.0);
  for (int n = 0; n < N; ++n)
    for (int j = 0; j < K; ++j) model_uni[j] += marg[n][j] / N;

  std::vector<double> emp_uni(K, 0.0);
  const double rows = static_cast<double>(generated.size());
  for (const auto& row : generated)
    for (int id : row) emp_uni[id] += 1.0 / (rows * N);

  double tv_uni = 0.0;
  for (int j = 0; j < K; ++j) tv_uni += std::abs(model_uni[j] - emp_uni[j]);
  m.unigram_tv = 0.5 * tv_uni;

  if (N >= 2) {
    std::vector<double> model_bi(static_cast<std::size_t>(K) * K, 0.0);
    for (int n = 0; n + 1 < N; ++n) {
      if (model.kind() == DataModel::Kind::kMarkov) {
        for (int a = 0; a < K; ++a)
          for (int b = 0; b < K; ++b)
            model_bi[a * K + b] +=
                marg[n][a] * model.transition()[a][b] / (N - 1);
      } else {
        for (int a = 0; a < K; ++a)
          for (int b = 0; b < K; ++b)
            model_bi[a * K + b] += marg[n][a] * marg[n + 1][b] / (N - 1);
      }
    }
    std::vector<double> emp_bi(static_cast<std::size_t>(K) * K, 0.0);
    for (const auto& row : generated)
      for (int n = 0; n + 1 < N; ++n)
        emp_bi[row[n] * K + row[n + 1]] += 1.0 / (rows * (N - 1));
    double tv_bi = 0.0;
    for (std::size_t i = 0; i < model_bi.size(); ++i)
      tv_bi += std::abs(model_bi[i] - emp_bi[i]);
    m.bigram_tv = 0.5 * tv_bi;
  }
  return m;
}

std::string render_metrics_json(const EvalMetrics& m) {
  std::string out = "{";
  if (m.paired) {
    out += "\"token_accuracy\": " + format_double(m.token_accuracy);
    out += ", \"exact_match\": " + format_double(m.exact_match);
  } else {
    out += "\"unigram_tv\": " + format_double(m.unigram_tv);
    out += ", \"bigram_tv\": " + format_double(m.bigram_tv);
  }
  out += "}\n";
  return out;
}

}  // namespace rdm
