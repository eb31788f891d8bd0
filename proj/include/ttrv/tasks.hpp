#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ttrv/canon.hpp"
#include "ttrv/policy.hpp"
#include "ttrv/prompt.hpp"

namespace ttrv {

enum class Generator {
  latent_knowledge,
  adversarial_majority,
  cross_distribution,
  biased_classes,
};

Generator parse_generator(std::string_view name);
std::string_view to_string(Generator generator);

struct TaskSpec {
  Generator generator = Generator::latent_knowledge;
  std::size_t n_prompts = 200;
  std::size_t d = 16;
  std::size_t k = 4;
  double tau = 0.35;    // attenuation of the true weights in the base policy
  double sigma = 0.8;   // scale of the weight noise in the base policy
  // Distance of each class-conditional feature mean from the origin, along
  // the normalized true weight row. 0 gives plain standard-normal features.
  double separation = 3.0;
  double modal_wrong_fraction = 0.3;
  std::vector<double> shift;   // cross_distribution; empty means 0.5 everywhere
  double shift_scale = 1.0;    // cross_distribution feature rescaling
  std::vector<std::size_t> class_subset{0};  // biased_classes
  std::uint64_t seed = 0;

  void validate() const;
};

// "latent_knowledge:seed=0,n=200,d=16,K=4,tau=0.35,sigma=0.8"
TaskSpec parse_task_spec(std::string_view text);
std::string format_task_spec(const TaskSpec& spec);

struct GeneratedTask {
  std::vector<Prompt> dataset;
  std::vector<Prompt> dataset_b;  // cross_distribution only
  Policy base_policy;
  std::optional<Policy> oracle_policy;  // generators with a true W*
  // Indices into dataset usable for adaptation (biased_classes restricts
  // these to class_subset); empty means every prompt.
  std::vector<std::size_t> adapt_pool;
};

GeneratedTask gen_latent_knowledge(const TaskSpec& spec);
GeneratedTask gen_adversarial_majority(const TaskSpec& spec);
GeneratedTask gen_cross_distribution(const TaskSpec& spec);
GeneratedTask gen_biased_classes(const TaskSpec& spec);
GeneratedTask generate(const TaskSpec& spec);

// Option keys "A", "B", ... for K options.
std::vector<std::string> option_letters(std::size_t k);

// Canonicalization matching a task's prompts.
CanonOptions default_canon(const TaskSpec& spec);

// Adaptation/evaluation split of a generated task.
//   latent_knowledge      first adapt_size prompts adapt, the rest evaluate
//   adversarial_majority  tabular: every prompt adapts and evaluates
//   cross_distribution    first adapt_size of A adapt, all of B evaluate
//   biased_classes        first adapt_size of the class-restricted pool
//                         adapt, every other prompt evaluates
struct TaskInstance {
  std::vector<Prompt> adapt_set;  // labels kept for reporting only
  std::vector<Prompt> eval_set;
  Policy base_policy;
  CanonOptions canon;
};

TaskInstance make_instance(const TaskSpec& spec, std::size_t adapt_size);

}  // namespace ttrv
