#include "ttrv/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ttrv/error.hpp"
#include "ttrv/rng.hpp"

namespace ttrv {

Generator parse_generator(std::string_view name) {
  if (name == "latent_knowledge") return Generator::latent_knowledge;
  if (name == "adversarial_majority") return Generator::adversarial_majority;
  if (name == "cross_distribution") return Generator::cross_distribution;
  if (name == "biased_classes") return Generator::biased_classes;
  fail(Errc::invalid_argument, "unknown generator '" + std::string(name) + "'");
}

std::string_view to_string(Generator generator) {
  switch (generator) {
    case Generator::latent_knowledge: return "latent_knowledge";
    case Generator::adversarial_majority: return "adversarial_majority";
    case Generator::cross_distribution: return "cross_distribution";
    case Generator::biased_classes: return "biased_classes";
  }
  return "latent_knowledge";
}

void TaskSpec::validate() const {
  auto bad = [](const std::string& what) { fail(Errc::invalid_argument, what); };
  if (n_prompts == 0) bad("n must be positive");
  if (k < 2 || k > 26) bad("K must be in [2, 26]");
  if (generator != Generator::adversarial_majority && d == 0) bad("d must be positive");
  if (generator == Generator::adversarial_majority && k < 3) {
    bad("adversarial_majority needs K >= 3");
  }
  if (!(tau > 0.0 && tau <= 1.0)) bad("tau must be in (0, 1]");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) bad("sigma must be >= 0");
  if (!(separation >= 0.0) || !std::isfinite(separation)) bad("separation must be >= 0");
  if (!(modal_wrong_fraction >= 0.0 && modal_wrong_fraction <= 1.0)) {
    bad("modal_wrong_fraction must be in [0, 1]");
  }
  if (!shift.empty() && shift.size() != d) bad("shift must have d entries");
  if (!std::isfinite(shift_scale) || shift_scale <= 0.0) bad("shift_scale must be > 0");
  if (generator == Generator::biased_classes) {
    if (class_subset.empty()) bad("class_subset must not be empty");
    for (auto c : class_subset) {
      if (c >= k) bad("class_subset entry out of range");
    }
  }
}

namespace {

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double out = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    fail(Errc::invalid_argument,
         "bad value '" + std::string(v) + "' for '" + std::string(key) + "'");
  }
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(Errc::invalid_argument,
         "bad value '" + std::string(v) + "' for '" + std::string(key) + "'");
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  while (b <= s.size()) {
    const auto e = s.find(sep, b);
    out.push_back(s.substr(b, e == std::string_view::npos ? s.size() - b : e - b));
    if (e == std::string_view::npos) break;
    b = e + 1;
  }
  return out;
}

}  // namespace

TaskSpec parse_task_spec(std::string_view text) {
  TaskSpec spec;
  const auto colon = text.find(':');
  spec.generator = parse_generator(text.substr(0, colon));
  if (spec.generator == Generator::adversarial_majority) spec.n_prompts = 20;
  if (colon != std::string_view::npos && colon + 1 < text.size()) {
    for (auto kv : split(text.substr(colon + 1), ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) {
        fail(Errc::invalid_argument, "expected key=value, got '" + std::string(kv) + "'");
      }
      const auto key = kv.substr(0, eq);
      const auto val = kv.substr(eq + 1);
      if (key == "seed") spec.seed = parse_uint(key, val);
      else if (key == "n") spec.n_prompts = parse_uint(key, val);
      else if (key == "d") spec.d = parse_uint(key, val);
      else if (key == "K" || key == "k") spec.k = parse_uint(key, val);
      else if (key == "tau") spec.tau = parse_double(key, val);
      else if (key == "sigma") spec.sigma = parse_double(key, val);
      else if (key == "sep" || key == "separation") spec.separation = parse_double(key, val);
      else if (key == "wrong" || key == "modal_wrong_fraction") {
        spec.modal_wrong_fraction = parse_double(key, val);
      } else if (key == "shift") {
        spec.shift.clear();
        for (auto x : split(val, ';')) spec.shift.push_back(parse_double(key, x));
      } else if (key == "shift_scale") {
        spec.shift_scale = parse_double(key, val);
      } else if (key == "classes" || key == "class_subset") {
        spec.class_subset.clear();
        for (auto x : split(val, ';')) spec.class_subset.push_back(parse_uint(key, x));
      } else {
        fail(Errc::invalid_argument, "unknown task parameter '" + std::string(key) + "'");
      }
    }
  }
  spec.validate();
  return spec;
}

std::string format_task_spec(const TaskSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << to_string(spec.generator) << ":seed=" << spec.seed
     << ",n=" << spec.n_prompts << ",d=" << spec.d << ",K=" << spec.k
     << ",tau=" << spec.tau << ",sigma=" << spec.sigma
     << ",sep=" << spec.separation;
  if (spec.generator == Generator::adversarial_majority) {
    os << ",wrong=" << spec.modal_wrong_fraction;
  }
  if (spec.generator == Generator::cross_distribution) {
    if (!spec.shift.empty()) {
      os << ",shift=";
      for (std::size_t i = 0; i < spec.shift.size(); ++i) {
        os << (i ? ";" : "") << spec.shift[i];
      }
    }
    os << ",shift_scale=" << spec.shift_scale;
  }
  if (spec.generator == Generator::biased_classes) {
    os << ",classes=";
    for (std::size_t i = 0; i < spec.class_subset.size(); ++i) {
      os << (i ? ";" : "") << spec.class_subset[i];
    }
  }
  return os.str();
}

std::vector<std::string> option_letters(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(1, static_cast<char>('A' + i));
  return out;
}

CanonOptions default_canon(const TaskSpec& spec) {
  CanonOptions c;
  c.scheme = Scheme::mcq_letter;
  c.alphabet.clear();
  for (const auto& o : option_letters(spec.k)) c.alphabet += o;
  return c;
}

namespace {

// Distinct streams for each generated quantity so that, e.g., changing n
// does not perturb W*.
enum StreamTag : std::uint64_t {
  kTrueWeights = 1,
  kNoise = 2,
  kFeaturesA = 3,
  kFeaturesB = 4,
  kTabular = 5,
};

struct LinearWorld {
  std::size_t k = 0;
  std::size_t d = 0;
  std::vector<double> w_star;  // K x d
  std::vector<std::vector<double>> unit_rows;
};

LinearWorld draw_world(const TaskSpec& spec) {
  LinearWorld w;
  w.k = spec.k;
  w.d = spec.d;
  Rng rng(derive_seed(spec.seed, {kTrueWeights}));
  // Entries ~ N(0, 1/d): rows have roughly unit norm, so logits of a
  // standard-normal feature vector are O(1) whatever d is.
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.d));
  w.w_star.resize(w.k * w.d);
  for (double& v : w.w_star) v = scale * rng.normal();
  for (std::size_t c = 0; c < w.k; ++c) {
    std::vector<double> row(w.w_star.begin() + c * w.d,
                            w.w_star.begin() + (c + 1) * w.d);
    double n = 0.0;
    for (double v : row) n += v * v;
    n = std::sqrt(n);
    for (double& v : row) v /= n;
    w.unit_rows.push_back(std::move(row));
  }
  return w;
}

std::size_t true_class(const LinearWorld& w, std::span<const double> x) {
  std::size_t best = 0;
  double best_v = -INFINITY;
  for (std::size_t c = 0; c < w.k; ++c) {
    double z = 0.0;
    for (std::size_t j = 0; j < w.d; ++j) z += w.w_star[c * w.d + j] * x[j];
    if (z > best_v) {
      best_v = z;
      best = c;
    }
  }
  return best;
}

std::vector<Prompt> draw_prompts(const TaskSpec& spec, const LinearWorld& w,
                                 StreamTag tag, const std::string& prefix,
                                 bool shifted) {
  Rng rng(derive_seed(spec.seed, {tag}));
  const auto options = option_letters(spec.k);
  std::vector<Prompt> out;
  out.reserve(spec.n_prompts);
  for (std::size_t i = 0; i < spec.n_prompts; ++i) {
    std::vector<double> x(spec.d);
    const std::size_t cluster = spec.separation > 0.0 ? rng.below(spec.k) : 0;
    for (std::size_t j = 0; j < spec.d; ++j) {
      x[j] = rng.normal() + spec.separation * w.unit_rows[cluster][j];
    }
    if (shifted) {
      for (std::size_t j = 0; j < spec.d; ++j) {
        const double s = spec.shift.empty() ? 0.5 : spec.shift[j];
        x[j] = spec.shift_scale * x[j] + s;
      }
    }
    Prompt p;
    char id[32];
    std::snprintf(id, sizeof id, "%s%04zu", prefix.c_str(), i);
    p.input.id = id;
    p.input.kind = PromptKind::choice;
    p.input.options = options;
    p.label = options[true_class(w, x)];
    p.input.features = std::move(x);
    out.push_back(std::move(p));
  }
  return out;
}

PolicyShape linear_shape(const TaskSpec& spec) {
  PolicyShape s;
  s.kind = PolicyKind::linear_softmax;
  s.num_options = spec.k;
  s.feature_dim = spec.d;
  return s;
}

// Base policy: tau * W* + sigma * noise, zero bias.
Policy attenuated_policy(const TaskSpec& spec, const LinearWorld& w) {
  Rng rng(derive_seed(spec.seed, {kNoise}));
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.d));
  std::vector<double> theta(spec.k * (spec.d + 1), 0.0);
  for (std::size_t i = 0; i < w.w_star.size(); ++i) {
    theta[i] = spec.tau * w.w_star[i] + spec.sigma * scale * rng.normal();
  }
  return Policy(linear_shape(spec), std::move(theta));
}

Policy oracle(const TaskSpec& spec, const LinearWorld& w) {
  std::vector<double> theta(spec.k * (spec.d + 1), 0.0);
  std::copy(w.w_star.begin(), w.w_star.end(), theta.begin());
  return Policy(linear_shape(spec), std::move(theta));
}

void require(const TaskSpec& spec, Generator g) {
  spec.validate();
  if (spec.generator != g) {
    fail(Errc::invalid_argument, "task spec is for generator " +
                                     std::string(to_string(spec.generator)));
  }
}

}  // namespace

GeneratedTask gen_latent_knowledge(const TaskSpec& spec) {
  require(spec, Generator::latent_knowledge);
  const auto w = draw_world(spec);
  return GeneratedTask{draw_prompts(spec, w, kFeaturesA, "lk", false),
                       {},
                       attenuated_policy(spec, w),
                       oracle(spec, w),
                       {}};
}

GeneratedTask gen_biased_classes(const TaskSpec& spec) {
  require(spec, Generator::biased_classes);
  const auto w = draw_world(spec);
  GeneratedTask t{draw_prompts(spec, w, kFeaturesA, "bc", false),
                  {},
                  attenuated_policy(spec, w),
                  oracle(spec, w),
                  {}};
  const auto options = option_letters(spec.k);
  for (std::size_t i = 0; i < t.dataset.size(); ++i) {
    for (auto c : spec.class_subset) {
      if (*t.dataset[i].label == options[c]) {
        t.adapt_pool.push_back(i);
        break;
      }
    }
  }
  return t;
}

GeneratedTask gen_cross_distribution(const TaskSpec& spec) {
  require(spec, Generator::cross_distribution);
  const auto w = draw_world(spec);
  return GeneratedTask{draw_prompts(spec, w, kFeaturesA, "a", false),
                       draw_prompts(spec, w, kFeaturesB, "b", true),
                       attenuated_policy(spec, w),
                       oracle(spec, w),
                       {}};
}

GeneratedTask gen_adversarial_majority(const TaskSpec& spec) {
  require(spec, Generator::adversarial_majority);
  Rng rng(derive_seed(spec.seed, {kTabular}));
  const auto options = option_letters(spec.k);
  const std::size_t n = spec.n_prompts;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  const auto n_wrong = static_cast<std::size_t>(
      std::llround(spec.modal_wrong_fraction * static_cast<double>(n)));
  std::vector<bool> wrong(n, false);
  for (std::size_t i = 0; i < n_wrong; ++i) wrong[order[i]] = true;

  PolicyShape shape;
  shape.kind = PolicyKind::tabular;
  shape.num_options = spec.k;
  std::vector<double> theta;
  theta.reserve(n * spec.k);
  std::vector<Prompt> dataset;
  const double rest = 0.25 / static_cast<double>(spec.k - 2);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t correct = rng.below(spec.k);
    std::size_t distractor = rng.below(spec.k - 1);
    if (distractor >= correct) ++distractor;
    std::vector<double> p(spec.k, rest);
    p[wrong[i] ? distractor : correct] = 0.40;
    p[wrong[i] ? correct : distractor] = 0.35;
    for (double v : p) theta.push_back(std::log(v));

    Prompt prompt;
    char id[32];
    std::snprintf(id, sizeof id, "am%04zu", i);
    prompt.input.id = id;
    prompt.input.kind = PromptKind::choice;
    prompt.input.options = options;
    prompt.label = options[correct];
    shape.prompt_ids.push_back(prompt.input.id);
    dataset.push_back(std::move(prompt));
  }
  return GeneratedTask{std::move(dataset), {},
                       Policy(std::move(shape), std::move(theta)), std::nullopt,
                       {}};
}

GeneratedTask generate(const TaskSpec& spec) {
  switch (spec.generator) {
    case Generator::latent_knowledge: return gen_latent_knowledge(spec);
    case Generator::adversarial_majority: return gen_adversarial_majority(spec);
    case Generator::cross_distribution: return gen_cross_distribution(spec);
    case Generator::biased_classes: return gen_biased_classes(spec);
  }
  fail(Errc::invalid_argument, "unknown generator");
}

TaskInstance make_instance(const TaskSpec& spec, std::size_t adapt_size) {
  auto t = generate(spec);
  TaskInstance inst{{}, {}, std::move(t.base_policy), default_canon(spec)};
  const std::size_t n = t.dataset.size();
  switch (spec.generator) {
    case Generator::latent_knowledge: {
      const std::size_t a = std::min(adapt_size, n);
      inst.adapt_set.assign(t.dataset.begin(), t.dataset.begin() + a);
      inst.eval_set.assign(t.dataset.begin() + a, t.dataset.end());
      break;
    }
    case Generator::adversarial_majority:
      inst.adapt_set = t.dataset;
      inst.eval_set = std::move(t.dataset);
      break;
    case Generator::cross_distribution: {
      const std::size_t a = std::min(adapt_size, n);
      inst.adapt_set.assign(t.dataset.begin(), t.dataset.begin() + a);
      inst.eval_set = std::move(t.dataset_b);
      break;
    }
    case Generator::biased_classes: {
      const std::size_t a = std::min(adapt_size, t.adapt_pool.size());
      std::vector<bool> used(n, false);
      for (std::size_t i = 0; i < a; ++i) {
        used[t.adapt_pool[i]] = true;
        inst.adapt_set.push_back(t.dataset[t.adapt_pool[i]]);
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!used[i]) inst.eval_set.push_back(t.dataset[i]);
      }
      break;
    }
  }
  return inst;
}

}  // namespace ttrv
