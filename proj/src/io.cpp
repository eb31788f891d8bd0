#include "ttrv/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ttrv/error.hpp"
#include "ttrv/reward.hpp"

namespace ttrv {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string format_real9(double value) {
  if (!std::isfinite(value)) fail(Errc::invalid_argument, "non-finite value in output");
  if (value == 0.0) return "0";  // also folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  const double target = std::strtod(buf, nullptr);
  for (int p = 1; p < 9; ++p) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", p, value);
    if (std::strtod(shorter, nullptr) == target) return shorter;
  }
  return buf;
}

namespace {

std::string format_real17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string quote(const std::string& s) {
  try {
    return json(s).dump();
  } catch (const json::exception& e) {
    fail(Errc::parse, std::string("invalid string: ") + e.what());
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write '" + path.string() + "'");
  return out;
}

std::string line_prefix(std::size_t line) {
  return "line " + std::to_string(line) + ": ";
}

template <typename T>
T field(const json& j, const char* name, std::size_t line) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    fail(Errc::parse, line_prefix(line) + "missing or invalid field '" + name + "'");
  }
}

}  // namespace

// ---- datasets -------------------------------------------------------------

DatasetHeader header_for(std::span<const Prompt> prompts, Scheme scheme) {
  DatasetHeader h;
  h.scheme = scheme;
  for (const auto& p : prompts) {
    if (p.input.kind == PromptKind::choice) {
      h.d = p.input.features.size();
      h.k = p.input.options.size();
    } else {
      for (int t : p.input.context) {
        h.v = std::max(h.v, static_cast<std::size_t>(t) + 1);
      }
    }
  }
  return h;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  const auto& h = dataset.header;
  out << "{\"d\":" << h.d << ",\"K\":" << h.k << ",\"V\":" << h.v
      << ",\"scheme\":" << quote(std::string(to_string(h.scheme))) << "}\n";
  for (const auto& p : dataset.prompts) {
    const auto& in = p.input;
    out << "{\"prompt_id\":" << quote(in.id) << ",\"kind\":"
        << quote(std::string(to_string(in.kind)));
    if (in.kind == PromptKind::choice) {
      out << ",\"features\":[";
      for (std::size_t i = 0; i < in.features.size(); ++i) {
        out << (i ? "," : "") << format_real17(in.features[i]);
      }
      out << "],\"options\":[";
      for (std::size_t i = 0; i < in.options.size(); ++i) {
        out << (i ? "," : "") << quote(in.options[i]);
      }
      out << "]";
    } else {
      out << ",\"context\":[";
      for (std::size_t i = 0; i < in.context.size(); ++i) {
        out << (i ? "," : "") << in.context[i];
      }
      out << "]";
    }
    if (p.label) out << ",\"label\":" << quote(*p.label);
    out << "}\n";
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  std::set<std::string, std::less<>> seen;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(Errc::parse, line_prefix(line) + e.what());
    }
    if (!j.is_object()) fail(Errc::parse, line_prefix(line) + "expected an object");
    if (!have_header) {
      if (j.contains("prompt_id")) fail(Errc::parse, line_prefix(line) + "missing header line");
      ds.header.d = j.value("d", std::size_t{0});
      ds.header.k = j.value("K", std::size_t{0});
      ds.header.v = j.value("V", std::size_t{0});
      try {
        ds.header.scheme = parse_scheme(j.value("scheme", std::string("mcq-letter")));
      } catch (const Error& e) {
        fail(Errc::parse, line_prefix(line) + e.what());
      }
      have_header = true;
      continue;
    }
    Prompt p;
    p.input.id = field<std::string>(j, "prompt_id", line);
    try {
      p.input.kind = parse_prompt_kind(field<std::string>(j, "kind", line));
    } catch (const Error& e) {
      fail(Errc::parse, line_prefix(line) + e.what());
    }
    if (p.input.kind == PromptKind::choice) {
      p.input.features = j.contains("features")
                             ? field<std::vector<double>>(j, "features", line)
                             : std::vector<double>{};
      p.input.options = field<std::vector<std::string>>(j, "options", line);
      if (ds.header.k != 0 && p.input.options.size() != ds.header.k) {
        fail(Errc::parse, line_prefix(line) + "option count differs from header K");
      }
      if (ds.header.d != 0 && p.input.features.size() != ds.header.d) {
        fail(Errc::parse, line_prefix(line) + "feature count differs from header d");
      }
    } else {
      p.input.context = field<std::vector<int>>(j, "context", line);
    }
    if (j.contains("label") && !j["label"].is_null()) {
      p.label = field<std::string>(j, "label", line);
    }
    try {
      validate_prompt(p);
    } catch (const Error& e) {
      fail(Errc::parse, line_prefix(line) + e.what());
    }
    if (!seen.insert(p.input.id).second) {
      fail(Errc::parse, line_prefix(line) + "duplicate prompt_id '" + p.input.id + "'");
    }
    ds.prompts.push_back(std::move(p));
  }
  if (!have_header) fail(Errc::parse, "dataset file is empty");
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  auto out = open_out(path);
  write_dataset(out, dataset);
  if (!out) fail(Errc::io, "failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

// ---- policies -------------------------------------------------------------

void write_policy(std::ostream& out, const Policy& policy) {
  const auto& s = policy.shape();
  out << "ttrv-policy 1\n"
      << "kind " << to_string(s.kind) << "\n"
      << "K " << s.num_options << "\n"
      << "d " << s.feature_dim << "\n"
      << "V " << s.vocab << "\n"
      << "order " << s.order << "\n"
      << "max_len " << s.max_len << "\n"
      << "prompts " << s.prompt_ids.size() << "\n";
  for (const auto& id : s.prompt_ids) out << id << "\n";
  out << "params " << policy.params().size() << "\n";
  for (double v : policy.params()) out << format_real17(v) << "\n";
}

Policy read_policy(std::istream& in) {
  std::string line;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) fail(Errc::parse, "truncated policy file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto keyed = [&](const char* key) -> std::string {
    const std::string l = next();
    const std::string prefix = std::string(key) + " ";
    if (l.rfind(prefix, 0) != 0) {
      fail(Errc::parse, "policy file: expected '" + std::string(key) + "', got '" + l + "'");
    }
    return l.substr(prefix.size());
  };
  auto count = [&](const char* key) -> std::size_t {
    const std::string v = keyed(key);
    char* end = nullptr;
    const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') fail(Errc::parse, "policy file: bad " + std::string(key));
    return static_cast<std::size_t>(n);
  };

  if (next() != "ttrv-policy 1") fail(Errc::parse, "not a policy file");
  PolicyShape s;
  try {
    s.kind = parse_policy_kind(keyed("kind"));
  } catch (const Error& e) {
    fail(Errc::parse, std::string("policy file: ") + e.what());
  }
  s.num_options = count("K");
  s.feature_dim = count("d");
  s.vocab = count("V");
  s.order = count("order");
  s.max_len = count("max_len");
  const std::size_t n_prompts = count("prompts");
  for (std::size_t i = 0; i < n_prompts; ++i) s.prompt_ids.push_back(next());
  const std::size_t n_params = count("params");
  std::vector<double> theta;
  theta.reserve(n_params);
  for (std::size_t i = 0; i < n_params; ++i) {
    const std::string v = next();
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') fail(Errc::parse, "policy file: bad parameter '" + v + "'");
    theta.push_back(x);
  }
  try {
    return Policy(std::move(s), std::move(theta));
  } catch (const Error& e) {
    fail(Errc::parse, std::string("policy file: ") + e.what());
  }
}

void save_policy(const std::filesystem::path& path, const Policy& policy) {
  auto out = open_out(path);
  write_policy(out, policy);
  if (!out) fail(Errc::io, "failed writing '" + path.string() + "'");
}

Policy load_policy(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_policy(in);
}

// ---- labeling -------------------------------------------------------------

namespace {

struct RolloutRecord {
  std::string prompt_id;
  std::vector<std::string> responses;
  std::optional<std::string> metadata;  // compact JSON
};

template <typename Fn>
std::string join(std::size_t n, Fn&& fn) {
  std::string out = "[";
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ",";
    out += fn(i);
  }
  return out + "]";
}

}  // namespace

LabelReport label_rollouts(std::istream& in, std::ostream& out,
                           const LabelSpec& spec) {
  spec.reward.validate();
  LabelReport report;
  std::vector<RolloutRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(Errc::parse, line_prefix(line) + "malformed record: " + e.what());
    }
    if (!j.is_object()) fail(Errc::parse, line_prefix(line) + "expected an object");
    if (j.contains("error")) {
      ++report.skipped;
      continue;
    }
    RolloutRecord r;
    r.prompt_id = field<std::string>(j, "prompt_id", line);
    r.responses = field<std::vector<std::string>>(j, "responses", line);
    if (r.responses.empty()) fail(Errc::parse, line_prefix(line) + "empty responses");
    if (j.contains("metadata")) {
      try {
        r.metadata = j["metadata"].dump();
      } catch (const json::exception& e) {
        fail(Errc::parse, line_prefix(line) + e.what());
      }
    }
    records.push_back(std::move(r));
  }

  std::vector<std::vector<CanonicalAnswer>> answers;
  std::vector<RewardVector> rewards;
  for (const auto& r : records) {
    std::vector<CanonicalAnswer> a;
    for (const auto& s : r.responses) a.push_back(canonicalize(s, spec.canon));
    rewards.push_back(combined_rewards(r.prompt_id, a, spec.reward));
    answers.push_back(std::move(a));
  }
  const auto adv = advantages(std::span<const RewardVector>(rewards), spec.scope,
                              spec.std_guard);

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto dist = build_distribution(answers[i]);
    const std::size_t n = r.responses.size();
    out << "{\"prompt_id\":" << quote(r.prompt_id) << ",\"responses\":"
        << join(n, [&](std::size_t k) { return quote(r.responses[k]); });
    if (r.metadata) out << ",\"metadata\":" << *r.metadata;
    out << ",\"scheme\":" << quote(std::string(to_string(spec.canon.scheme)))
        << ",\"mode\":" << quote(std::string(to_string(spec.reward.mode)))
        << ",\"alpha\":" << format_real9(spec.reward.alpha)
        << ",\"scope\":" << quote(std::string(to_string(spec.scope)))
        << ",\"N\":" << n << ",\"M\":" << dist.m()
        << ",\"entropy\":" << format_real9(rewards[i].entropy)
        << ",\"r2\":" << format_real9(-rewards[i].entropy)
        << ",\"degenerate\":" << (adv[i].degenerate ? "true" : "false")
        << ",\"keys\":"
        << join(n, [&](std::size_t k) { return quote(answers[i][k].key); })
        << ",\"p\":"
        << join(n, [&](std::size_t k) {
             return format_real9(frequency_reward(dist, answers[i][k]));
           })
        << ",\"r1\":"
        << join(n, [&](std::size_t k) {
             return format_real9(frequency_reward(dist, answers[i][k]));
           })
        << ",\"reward\":"
        << join(n, [&](std::size_t k) { return format_real9(rewards[i].values[k]); })
        << ",\"advantage\":"
        << join(n, [&](std::size_t k) { return format_real9(adv[i].values[k]); })
        << "}\n";
    ++report.labeled;
  }
  return report;
}

LabelReport label_rollouts_file(const std::filesystem::path& in_path,
                                const std::filesystem::path& out_path,
                                const LabelSpec& spec) {
  auto in = open_in(in_path);
  // Label fully in memory first so a parse error never leaves a partial file.
  std::ostringstream buffer;
  const auto report = label_rollouts(in, buffer, spec);
  auto out = open_out(out_path);
  out << buffer.str();
  if (!out) fail(Errc::io, "failed writing '" + out_path.string() + "'");
  return report;
}

// ---- run artifacts --------------------------------------------------------

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "step,mean_reward,mean_group_entropy,kl_to_ref,grad_norm,"
         "eval_accuracy,degenerate_groups,wall_ms\n";
  for (const auto& r : trajectory.steps) {
    out << r.step << ',' << format_real9(r.mean_reward) << ','
        << format_real9(r.mean_group_entropy) << ',' << format_real9(r.kl_to_ref)
        << ',' << format_real9(r.grad_norm) << ','
        << (r.eval_accuracy ? format_real9(*r.eval_accuracy) : std::string())
        << ',' << r.degenerate_groups << ',' << r.wall_ms << '\n';
  }
}

namespace {

ordered_json config_json(const AdaptConfig& c) {
  ordered_json j;
  j["n_rollouts"] = c.n_rollouts;
  j["alpha"] = c.reward.alpha;
  j["temperature"] = c.temperature;
  j["lr"] = c.lr;
  j["kl_beta"] = c.kl_beta;
  j["clip_eps"] = c.clip_eps;
  j["inner_epochs"] = c.inner_epochs;
  j["advantage_scope"] = std::string(to_string(c.advantage_scope));
  j["objective"] = std::string(to_string(c.objective));
  j["std_guard"] = c.std_guard;
  j["steps"] = c.steps;
  j["batch_prompts"] = c.batch_prompts;
  j["eval_interval"] = c.eval_interval;
  j["seed"] = c.seed;
  j["reward_mode"] = std::string(to_string(c.reward.mode));
  j["reward_seed"] = c.reward.random_seed;
  j["scheme"] = std::string(to_string(c.canon.scheme));
  j["alphabet"] = c.canon.alphabet;
  return j;
}

}  // namespace

std::string to_string(const AdaptConfig& config) {
  return config_json(config).dump();
}

void write_summary(std::ostream& out, const Trajectory& trajectory,
                   const std::map<std::string, std::string>& extra) {
  ordered_json j;
  j["status"] = trajectory.status == RunStatus::ok ? "ok" : "diverged";
  if (!trajectory.error.empty()) j["error"] = trajectory.error;
  j["config"] = config_json(trajectory.config);
  j["seed"] = trajectory.config.seed;
  j["rows"] = trajectory.steps.size();
  if (!trajectory.steps.empty()) {
    const auto& first = trajectory.steps.front();
    const auto& last = trajectory.steps.back();
    j["initial_entropy"] = first.mean_group_entropy;
    j["final_entropy"] = last.mean_group_entropy;
    if (first.eval_accuracy) j["initial_accuracy"] = *first.eval_accuracy;
    if (last.eval_accuracy) j["final_accuracy"] = *last.eval_accuracy;
    if (first.policy_entropy) j["initial_policy_entropy"] = *first.policy_entropy;
    if (last.policy_entropy) j["final_policy_entropy"] = *last.policy_entropy;
    j["final_kl_to_ref"] = last.kl_to_ref;
  }
  for (const auto& [k, v] : extra) j[k] = v;
  out << j.dump(2) << "\n";
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "mode,seeds,mean_initial_accuracy,mean_final_accuracy,mean_delta,"
         "std_delta\n";
  for (const auto& r : rows) {
    double init = 0.0;
    for (double v : r.initial_accuracy) init += v;
    init /= static_cast<double>(std::max<std::size_t>(r.seeds.size(), 1));
    out << to_string(r.mode) << ',' << r.seeds.size() << ',' << format_real9(init)
        << ',' << format_real9(r.mean_final) << ',' << format_real9(r.mean_delta)
        << ',' << format_real9(r.std_delta) << '\n';
  }
}

}  // namespace ttrv
