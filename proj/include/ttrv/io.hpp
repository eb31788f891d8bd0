#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttrv/canon.hpp"
#include "ttrv/engine.hpp"
#include "ttrv/grpo.hpp"
#include "ttrv/policy.hpp"
#include "ttrv/prompt.hpp"

namespace ttrv {

// At most 9 significant digits, using the fewest digits that still parse back
// to the 9-digit value. Platform independent ("0.75", "-1.73205081").
std::string format_real9(double value);

// ---- dataset files (line-delimited JSON) ----------------------------------
// Header line: {"d":16,"K":4,"V":0,"scheme":"mcq-letter"}; then one record
// per prompt: {"prompt_id","kind","features","options","context","label"}.

struct DatasetHeader {
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t v = 0;
  Scheme scheme = Scheme::mcq_letter;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Prompt> prompts;
};

DatasetHeader header_for(std::span<const Prompt> prompts, Scheme scheme);
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

// ---- policy files ---------------------------------------------------------
// Text header (kind and shape) followed by one parameter per line, %.17g.

void write_policy(std::ostream& out, const Policy& policy);
Policy read_policy(std::istream& in);
void save_policy(const std::filesystem::path& path, const Policy& policy);
Policy load_policy(const std::filesystem::path& path);

// ---- rollout labeling -----------------------------------------------------

struct LabelSpec {
  RewardSpec reward;
  AdvantageScope scope = AdvantageScope::per_group;
  double std_guard = 1e-8;
  CanonOptions canon;
};

struct LabelReport {
  std::size_t labeled = 0;
  std::size_t skipped = 0;  // records carrying an "error" field
};

// Reads RolloutRecords ({"prompt_id","responses","metadata"?}) and writes one
// labeled record per line in input order. Fields beyond those three are
// ignored, so relabeling a labeled file reproduces it. Malformed lines throw
// Errc::parse naming the 1-based line number.
LabelReport label_rollouts(std::istream& in, std::ostream& out,
                           const LabelSpec& spec);
LabelReport label_rollouts_file(const std::filesystem::path& in,
                                const std::filesystem::path& out,
                                const LabelSpec& spec);

// ---- run artifacts --------------------------------------------------------

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
void write_summary(std::ostream& out, const Trajectory& trajectory,
                   const std::map<std::string, std::string>& extra = {});
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

std::string to_string(const AdaptConfig& config);

}  // namespace ttrv
