#include "rdm/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rdm/trainer.hpp"

namespace rdm {

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string json_double_array(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  out += "]";
  return out;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::vector<std::vector<int>> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus: " + path);
  std::vector<std::vector<int>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<int> row;
    int id;
    while (ls >> id) row.push_back(id);
    if (!ls.eof())
      throw std::runtime_error("corpus has a non-integer token: " + path);
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("corpus rows have unequal lengths: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("corpus is empty: " + path);
  return rows;
}

void save_corpus(const std::string& path,
                 const std::vector<std::vector<int>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(row[i]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

namespace {

std::string render_matrix(const std::vector<Categorical>& rows) {
  std::string out = "[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) out += ", ";
    out += json_double_array(rows[i].probs());
  }
  out += "]";
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_data_model(const std::string& path, const DataModel& model) {
  std::string out = "{\"kind\": \"";
  out += model.kind() == DataModel::Kind::kFactorized ? "factorized" : "markov";
  out += "\", \"K\": " + std::to_string(model.vocab());
  out += ", \"N\": " + std::to_string(model.length());
  if (model.kind() == DataModel::Kind::kFactorized) {
    out += ", \"marginals\": " + render_matrix(model.marginals());
  } else {
    out += ", \"initial\": " + json_double_array(model.initial().probs());
    out += ", \"transition\": " + render_matrix(model.transition());
  }
  out += "}\n";
  write_file_atomic(path, out);
}

DataModel load_data_model(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  const std::string kind = j.at("kind").get<std::string>();
  const int N = j.at("N").get<int>();
  auto to_rows = [](const nlohmann::json& arr) {
    std::vector<Categorical> rows;
    for (const auto& row : arr)
      rows.emplace_back(row.get<std::vector<double>>());
    return rows;
  };
  if (kind == "factorized")
    return DataModel::factorized(to_rows(j.at("marginals")));
  if (kind == "markov")
    return DataModel::markov(Categorical(j.at("initial").get<std::vector<double>>()),
                             to_rows(j.at("transition")), N);
  throw std::runtime_error("unknown data model kind: " + kind);
}

NoiseDistribution Checkpoint::noise() const {
  const int K = arch.K;
  if (noise_kind == "uniform") return NoiseDistribution::uniform(K);
  if (noise_kind == "absorbing")
    return NoiseDistribution::absorbing(K, mask_id >= 0 ? mask_id : K - 1);
  if (noise_kind == "custom")
    return NoiseDistribution::custom(Categorical(noise_probs));
  throw std::runtime_error("unknown noise kind: " + noise_kind);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out = "{\"version\": " + std::to_string(ckpt.version);
  out += ", \"arch\": {\"K\": " + std::to_string(ckpt.arch.K);
  out += ", \"N_max\": " + std::to_string(ckpt.arch.N_max);
  out += ", \"embed_dim\": " + std::to_string(ckpt.arch.embed_dim);
  out += ", \"time_dim\": " + std::to_string(ckpt.arch.time_dim);
  out += ", \"hidden_dim\": " + std::to_string(ckpt.arch.hidden_dim);
  out += ", \"context\": \"" + ckpt.arch.context_name() + "\"";
  out += ", \"window\": " + std::to_string(ckpt.arch.window) + "}";
  out += ", \"params\": " + json_double_array(ckpt.params);
  out += ", \"ema_params\": ";
  out += ckpt.ema_params ? json_double_array(*ckpt.ema_params) : "null";
  out += ", \"schedule\": {\"T\": " +
         std::to_string(static_cast<int>(ckpt.alpha.size()) - 1);
  out += ", \"alpha\": " + json_double_array(ckpt.alpha) + "}";
  out += ", \"noise\": {\"kind\": \"" + ckpt.noise_kind + "\"";
  if (ckpt.noise_kind == "absorbing")
    out += ", \"mask_id\": " + std::to_string(ckpt.mask_id);
  if (ckpt.noise_kind == "custom")
    out += ", \"probs\": " + json_double_array(ckpt.noise_probs);
  out += "}}\n";
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  Checkpoint ckpt;
  ckpt.version = j.at("version").get<int>();
  if (ckpt.version != 1)
    throw std::runtime_error("unsupported checkpoint version");
  const nlohmann::json& arch = j.at("arch");
  ckpt.arch.K = arch.at("K").get<int>();
  ckpt.arch.N_max = arch.at("N_max").get<int>();
  ckpt.arch.embed_dim = arch.at("embed_dim").get<int>();
  ckpt.arch.time_dim = arch.at("time_dim").get<int>();
  ckpt.arch.hidden_dim = arch.at("hidden_dim").get<int>();
  const std::string ctx = arch.at("context").get<std::string>();
  if (ctx == "mean_pool")
    ckpt.arch.context = DenoiserArch::Context::kMeanPool;
  else if (ctx == "window")
    ckpt.arch.context = DenoiserArch::Context::kWindow;
  else
    throw std::runtime_error("unknown context kind: " + ctx);
  ckpt.arch.window = arch.at("window").get<int>();
  ckpt.params = j.at("params").get<std::vector<double>>();
  if (!j.at("ema_params").is_null())
    ckpt.ema_params = j.at("ema_params").get<std::vector<double>>();
  ckpt.alpha = j.at("schedule").at("alpha").get<std::vector<double>>();
  const nlohmann::json& noise = j.at("noise");
  ckpt.noise_kind = noise.at("kind").get<std::string>();
  if (ckpt.noise_kind == "absorbing")
    ckpt.mask_id = noise.at("mask_id").get<int>();
  if (ckpt.noise_kind == "custom")
    ckpt.noise_probs = noise.at("probs").get<std::vector<double>>();
  if (static_cast<long>(ckpt.params.size()) != ckpt.arch.param_count())
    throw std::runtime_error("checkpoint parameter count mismatch");
  return ckpt;
}

std::string render_report_json(const std::vector<CheckReport>& reports) {
  std::string out = "[";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const CheckReport& r = reports[i];
    if (i) out += ",";
    out += "\n  {\"name\": \"" + json_escape(r.name) + "\"";
    out += ", \"passed\": ";
    out += r.passed ? "true" : "false";
    out += ", \"max_error\": " + format_double(r.max_error);
    out += ", \"tolerance\": " + format_double(r.tolerance);
    out += ", \"cases_run\": " + std::to_string(r.cases_run) + "}";
  }
  out += "\n]\n";
  return out;
}

std::vector<CheckReport> parse_report_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  std::vector<CheckReport> reports;
  for (const auto& item : j) {
    CheckReport r;
    r.name = item.at("name").get<std::string>();
    r.passed = item.at("passed").get<bool>();
    r.max_error = item.at("max_error").get<double>();
    r.tolerance = item.at("tolerance").get<double>();
    r.cases_run = item.at("cases_run").get<long>();
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string render_loss_csv(const std::vector<LossCurveRow>& rows) {
  std::string out = "step,loss,weight,t\n";
  for (const LossCurveRow& r : rows) {
    out += std::to_string(r.step) + "," + format_double(r.loss) + "," +
           format_double(r.weight) + "," + format_double(r.t) + "\n";
  }
  return out;
}

}  // namespace rdm
