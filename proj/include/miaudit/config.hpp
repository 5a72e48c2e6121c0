#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "miaudit/attack.hpp"
#include "miaudit/train.hpp"

namespace miaudit {

// Experiment configuration, parsed from a sectioned key=value file. Unknown
// sections or keys are errors; every key has a documented default.
struct ExperimentConfig {
    // [experiment]
    std::uint64_t seed = 1;
    int members = 100;  // m: members and non-members sampled per population
    std::string output_dir = "out";
    int threads = 0;

    // [data]
    enum class Source { Idx, CifarBin, Synthetic };
    Source source = Source::Synthetic;
    std::string train_images, train_labels, test_images, test_labels;  // idx
    std::string train_file, test_file;                                 // cifar-bin
    int classes = 3, per_class = 200, dim = 16, test_per_class = 200;  // synthetic
    double separation = 3.0;

    // [model]
    enum class Arch { Mlp, Cnn5 };
    Arch arch = Arch::Mlp;
    std::vector<int> hidden = {32};
    std::string checkpoint;  // when set, audit loads instead of training

    // [train]
    TrainConfig train;

    // [attack] (sm_adv / evaluation attack and the C&W-style optimizer)
    AttackConfig attack;

    // [grid]
    std::vector<double> lambdas = {0.4, 0.6, 0.8, 1.0};
    std::vector<double> temperatures = {0.5, 1.0, 3.0, 5.0};
    enum class TargetPolicy { AllOtherClasses, RandomSubset };
    TargetPolicy target_policy = TargetPolicy::AllOtherClasses;
    int target_subset_size = 10;
    std::uint64_t target_seed = 1;
    bool trace_attacks = false;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);

    // Applies "section.key=value"; flags win over file values.
    void set(const std::string& dotted_key, const std::string& value);

    void validate() const;

    // Canonical key=value echo (deterministic order) for the report bundle.
    std::vector<std::pair<std::string, std::string>> echo() const;
};

}  // namespace miaudit
