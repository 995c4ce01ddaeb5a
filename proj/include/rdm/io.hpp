#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rdm/denoiser.hpp"
#include "rdm/verify.hpp"

namespace rdm {

struct LossCurveRow;

// Writes content to a temp file next to path, then renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

// Doubles in emitted JSON/CSV carry 17 significant digits so values
// round-trip bit-exactly.
std::string format_double(double v);
std::string json_double_array(const std::vector<double>& v);
std::string json_escape(const std::string& s);

// --- corpus files: one sequence per line, space-separated decimal ids ---

std::vector<std::vector<int>> load_corpus(const std::string& path);
void save_corpus(const std::string& path,
                 const std::vector<std::vector<int>>& rows);

// --- synthetic data model sidecar JSON ---

void save_data_model(const std::string& path, const DataModel& model);
DataModel load_data_model(const std::string& path);

// --- checkpoint JSON ---

struct Checkpoint {
  int version = 1;
  DenoiserArch arch;
  std::vector<double> params;
  std::optional<std::vector<double>> ema_params;
  std::vector<double> alpha;  // full schedule, family resolved
  std::string noise_kind;    // uniform | absorbing | custom
  int mask_id = -1;
  std::vector<double> noise_probs;  // custom only

  AlphaSchedule schedule() const { return AlphaSchedule(alpha); }
  NoiseDistribution noise() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// --- verify report JSON (array of CheckReports) ---

std::string render_report_json(const std::vector<CheckReport>& reports);
std::vector<CheckReport> parse_report_json(const std::string& text);

// --- loss curve CSV ---

std::string render_loss_csv(const std::vector<LossCurveRow>& rows);

}  // namespace rdm
