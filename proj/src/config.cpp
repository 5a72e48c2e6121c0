#include "miaudit/config.hpp"

#include <fstream>
#include <sstream>

namespace miaudit {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
    return parts;
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& p : split(v, ',')) {
        if (!p.empty()) out.push_back(parse_double(key, p));
    }
    if (out.empty()) throw ConfigError("config: key '" + key + "' expects a non-empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& p : split(v, ',')) {
        if (!p.empty()) out.push_back(static_cast<int>(parse_int(key, p)));
    }
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string fmt_double_list(const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

std::string fmt_int_list(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

}  // namespace

void ExperimentConfig::set(const std::string& dotted_key, const std::string& raw_value) {
    const std::size_t dot = dotted_key.find('.');
    if (dot == std::string::npos) {
        throw ConfigError("config: expected section.key, got '" + dotted_key + "'");
    }
    const std::string section = dotted_key.substr(0, dot);
    const std::string key = dotted_key.substr(dot + 1);
    const std::string value = trim(raw_value);
    const std::string full = section + "." + key;

    if (section == "experiment") {
        if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(full, value));
        else if (key == "members") members = static_cast<int>(parse_int(full, value));
        else if (key == "output_dir") output_dir = value;
        else if (key == "threads") threads = static_cast<int>(parse_int(full, value));
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "data") {
        if (key == "source") {
            if (value == "idx") source = Source::Idx;
            else if (value == "cifar-bin") source = Source::CifarBin;
            else if (value == "synthetic") source = Source::Synthetic;
            else throw ConfigError("config: data.source must be idx|cifar-bin|synthetic");
        }
        else if (key == "train_images") train_images = value;
        else if (key == "train_labels") train_labels = value;
        else if (key == "test_images") test_images = value;
        else if (key == "test_labels") test_labels = value;
        else if (key == "train_file") train_file = value;
        else if (key == "test_file") test_file = value;
        else if (key == "classes") classes = static_cast<int>(parse_int(full, value));
        else if (key == "per_class") per_class = static_cast<int>(parse_int(full, value));
        else if (key == "test_per_class") test_per_class = static_cast<int>(parse_int(full, value));
        else if (key == "dim") dim = static_cast<int>(parse_int(full, value));
        else if (key == "separation") separation = parse_double(full, value);
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "model") {
        if (key == "arch") {
            if (value == "mlp") arch = Arch::Mlp;
            else if (value == "cnn5") arch = Arch::Cnn5;
            else throw ConfigError("config: model.arch must be mlp|cnn5");
        }
        else if (key == "hidden") hidden = parse_int_list(full, value);
        else if (key == "checkpoint") checkpoint = value;
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "train") {
        if (key == "epochs") train.epochs = static_cast<int>(parse_int(full, value));
        else if (key == "batch_size") train.batch_size = static_cast<int>(parse_int(full, value));
        else if (key == "lr") train.learning_rate = parse_double(full, value);
        else if (key == "optimizer") {
            if (value == "sgd") train.optimizer = TrainConfig::Optimizer::Sgd;
            else if (value == "sgd-momentum") train.optimizer = TrainConfig::Optimizer::SgdMomentum;
            else throw ConfigError("config: train.optimizer must be sgd|sgd-momentum");
        }
        else if (key == "adversarial") train.adversarial = parse_bool(full, value);
        else if (key == "adv_epsilon") train.adv_epsilon = parse_double(full, value);
        else if (key == "adv_steps") train.adv_steps = static_cast<int>(parse_int(full, value));
        else if (key == "adv_step_size") train.adv_step_size = parse_double(full, value);
        else if (key == "adv_norm") train.adv_norm = norm_from_string(value);
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "attack") {
        if (key == "family") attack.family = attack_family_from_string(value);
        else if (key == "norm") attack.norm = norm_from_string(value);
        else if (key == "epsilon") attack.epsilon = parse_double(full, value);
        else if (key == "steps") attack.steps = static_cast<int>(parse_int(full, value));
        else if (key == "step_size") attack.step_size = parse_double(full, value);
        else if (key == "alpha") attack.alpha = parse_double(full, value);
        else if (key == "iters") attack.max_iters = static_cast<int>(parse_int(full, value));
        else if (key == "cw_step_size") attack.cw_step_size = parse_double(full, value);
        else if (key == "box_lo") attack.box_lo = parse_double(full, value);
        else if (key == "box_hi") attack.box_hi = parse_double(full, value);
        else throw ConfigError("config: unknown key '" + full + "'");
    } else if (section == "grid") {
        if (key == "lambdas") lambdas = parse_double_list(full, value);
        else if (key == "temperatures") temperatures = parse_double_list(full, value);
        else if (key == "targets") {
            if (value == "all") {
                target_policy = TargetPolicy::AllOtherClasses;
            } else if (value.rfind("random:", 0) == 0) {
                target_policy = TargetPolicy::RandomSubset;
                target_subset_size = static_cast<int>(parse_int(full, value.substr(7)));
            } else {
                throw ConfigError("config: grid.targets must be all|random:<size>");
            }
        }
        else if (key == "target_seed") target_seed = static_cast<std::uint64_t>(parse_int(full, value));
        else if (key == "trace_attacks") trace_attacks = parse_bool(full, value);
        else throw ConfigError("config: unknown key '" + full + "'");
    } else {
        throw ConfigError("config: unknown section '[" + section + "]'");
    }
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError("config: malformed section header at line " +
                                  std::to_string(lineno));
            }
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) {
                throw ConfigError("config: empty section name at line " + std::to_string(lineno));
            }
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
        }
        if (section.empty()) {
            throw ConfigError("config: key outside any section at line " + std::to_string(lineno));
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config: empty key at line " + std::to_string(lineno));
        }
        try {
            cfg.set(section + "." + key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

void ExperimentConfig::validate() const {
    if (members < 1) throw ConfigError("config: experiment.members must be >= 1");
    if (threads < 0) throw ConfigError("config: experiment.threads must be >= 0");
    if (output_dir.empty()) throw ConfigError("config: experiment.output_dir must be set");
    if (source == Source::Idx) {
        if (train_images.empty() || train_labels.empty() || test_images.empty() ||
            test_labels.empty()) {
            throw ConfigError("config: idx source requires data.train_images/train_labels/"
                              "test_images/test_labels");
        }
    } else if (source == Source::CifarBin) {
        if (train_file.empty() || test_file.empty()) {
            throw ConfigError("config: cifar-bin source requires data.train_file/test_file");
        }
    } else {
        if (classes < 2) throw ConfigError("config: data.classes must be >= 2");
        if (per_class < 1 || test_per_class < 1) {
            throw ConfigError("config: data.per_class/test_per_class must be >= 1");
        }
        if (dim < 1) throw ConfigError("config: data.dim must be >= 1");
        if (!(separation > 0.0)) throw ConfigError("config: data.separation must be > 0");
    }
    if (arch == Arch::Mlp) {
        for (int h : hidden) {
            if (h < 1) throw ConfigError("config: model.hidden sizes must be positive");
        }
    }
    train.validate();
    if (lambdas.empty() || temperatures.empty()) {
        throw ConfigError("config: grid.lambdas and grid.temperatures must be non-empty");
    }
    for (double t : temperatures) {
        if (!(t > 0.0)) throw ConfigError("config: grid temperatures must be > 0");
    }
    if (target_policy == TargetPolicy::RandomSubset && target_subset_size < 1) {
        throw ConfigError("config: grid.targets random subset size must be >= 1");
    }
    // the (1/n, 1] lambda range depends on the dataset class count and is
    // checked once the experiment resolves the dataset
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("experiment.seed", std::to_string(seed));
    kv.emplace_back("experiment.members", std::to_string(members));
    kv.emplace_back("experiment.output_dir", output_dir);
    kv.emplace_back("experiment.threads", std::to_string(threads));
    kv.emplace_back("data.source", source == Source::Idx        ? "idx"
                                   : source == Source::CifarBin ? "cifar-bin"
                                                                : "synthetic");
    if (source == Source::Idx) {
        kv.emplace_back("data.train_images", train_images);
        kv.emplace_back("data.train_labels", train_labels);
        kv.emplace_back("data.test_images", test_images);
        kv.emplace_back("data.test_labels", test_labels);
    } else if (source == Source::CifarBin) {
        kv.emplace_back("data.train_file", train_file);
        kv.emplace_back("data.test_file", test_file);
    } else {
        kv.emplace_back("data.classes", std::to_string(classes));
        kv.emplace_back("data.per_class", std::to_string(per_class));
        kv.emplace_back("data.test_per_class", std::to_string(test_per_class));
        kv.emplace_back("data.dim", std::to_string(dim));
        kv.emplace_back("data.separation", fmt_double(separation));
    }
    kv.emplace_back("model.arch", arch == Arch::Mlp ? "mlp" : "cnn5");
    if (arch == Arch::Mlp) kv.emplace_back("model.hidden", fmt_int_list(hidden));
    if (!checkpoint.empty()) kv.emplace_back("model.checkpoint", checkpoint);
    kv.emplace_back("train.epochs", std::to_string(train.epochs));
    kv.emplace_back("train.batch_size", std::to_string(train.batch_size));
    kv.emplace_back("train.lr", fmt_double(train.learning_rate));
    kv.emplace_back("train.optimizer",
                    train.optimizer == TrainConfig::Optimizer::Sgd ? "sgd" : "sgd-momentum");
    kv.emplace_back("train.adversarial", train.adversarial ? "true" : "false");
    if (train.adversarial) {
        kv.emplace_back("train.adv_epsilon", fmt_double(train.adv_epsilon));
        kv.emplace_back("train.adv_steps", std::to_string(train.adv_steps));
        kv.emplace_back("train.adv_step_size", fmt_double(train.adv_step_size));
        kv.emplace_back("train.adv_norm", train.adv_norm == NormKind::Linf ? "linf" : "l2");
    }
    kv.emplace_back("attack.family", attack.family == AttackFamily::Fgsm  ? "fgsm"
                                     : attack.family == AttackFamily::Pgd ? "pgd"
                                                                          : "cw");
    kv.emplace_back("attack.norm", attack.norm == NormKind::Linf ? "linf" : "l2");
    kv.emplace_back("attack.epsilon", fmt_double(attack.epsilon));
    kv.emplace_back("attack.steps", std::to_string(attack.steps));
    kv.emplace_back("attack.step_size", fmt_double(attack.step_size));
    kv.emplace_back("attack.alpha", fmt_double(attack.alpha));
    kv.emplace_back("attack.iters", std::to_string(attack.max_iters));
    kv.emplace_back("attack.cw_step_size", fmt_double(attack.cw_step_size));
    kv.emplace_back("attack.box_lo", fmt_double(attack.box_lo));
    kv.emplace_back("attack.box_hi", fmt_double(attack.box_hi));
    kv.emplace_back("grid.lambdas", fmt_double_list(lambdas));
    kv.emplace_back("grid.temperatures", fmt_double_list(temperatures));
    kv.emplace_back("grid.targets",
                    target_policy == TargetPolicy::AllOtherClasses
                        ? "all"
                        : "random:" + std::to_string(target_subset_size));
    kv.emplace_back("grid.target_seed", std::to_string(target_seed));
    kv.emplace_back("grid.trace_attacks", trace_attacks ? "true" : "false");
    return kv;
}

}  // namespace miaudit
