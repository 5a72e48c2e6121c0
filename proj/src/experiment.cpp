#include "miaudit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "miaudit/dataset.hpp"
#include "miaudit/format.hpp"
#include "miaudit/parallel.hpp"
#include "miaudit/rng.hpp"
#include "miaudit/train.hpp"

namespace fs = std::filesystem;

namespace miaudit {

namespace {

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << content;
    if (!out) throw DataError("failed writing: " + path);
}

struct SplitData {
    Dataset train;
    Dataset test;
};

SplitData resolve_dataset(const ExperimentConfig& cfg) {
    SplitData d;
    switch (cfg.source) {
        case ExperimentConfig::Source::Idx:
            d.train = load_idx(cfg.train_images, cfg.train_labels);
            d.test = load_idx(cfg.test_images, cfg.test_labels);
            break;
        case ExperimentConfig::Source::CifarBin:
            d.train = load_cifar_bin(cfg.train_file);
            d.test = load_cifar_bin(cfg.test_file);
            break;
        case ExperimentConfig::Source::Synthetic: {
            // one generation pass so train and test share the class means
            Dataset all = gen_synthetic(cfg.classes, cfg.per_class + cfg.test_per_class, cfg.dim,
                                        cfg.separation, cfg.seed);
            d.train.input_shape = d.test.input_shape = all.input_shape;
            d.train.num_classes = d.test.num_classes = all.num_classes;
            for (int c = 0; c < cfg.classes; ++c) {
                const std::size_t base =
                    static_cast<std::size_t>(c) *
                    static_cast<std::size_t>(cfg.per_class + cfg.test_per_class);
                for (int i = 0; i < cfg.per_class + cfg.test_per_class; ++i) {
                    Dataset& dst = i < cfg.per_class ? d.train : d.test;
                    dst.examples.push_back(all.examples[base + static_cast<std::size_t>(i)]);
                    dst.labels.push_back(all.labels[base + static_cast<std::size_t>(i)]);
                }
            }
            break;
        }
    }
    if (d.train.size() == 0) throw DataError("training split is empty");
    if (d.test.size() == 0) throw DataError("test split is empty");
    if (d.train.num_classes != d.test.num_classes ||
        d.train.input_shape != d.test.input_shape) {
        throw DataError("train and test splits disagree on shape or class count");
    }
    return d;
}

Classifier build_model(const ExperimentConfig& cfg, const Dataset& data) {
    Rng rng = Rng::derive(cfg.seed, 0);
    if (cfg.arch == ExperimentConfig::Arch::Mlp) {
        return Classifier::mlp(data.input_shape, cfg.hidden, data.num_classes, rng);
    }
    Shape shape = data.input_shape;
    if (shape.size() == 1) {
        throw ConfigError("cnn5 requires image-shaped inputs (C,H,W)");
    }
    return Classifier::cnn5(shape, data.num_classes, rng);
}

// sm_adv / evaluation attack derived from [attack]: fgsm degenerates to a
// single epsilon-sized step, cw falls back to the pgd settings.
AttackConfig smadv_attack(const ExperimentConfig& cfg) {
    AttackConfig a = cfg.attack;
    if (a.family == AttackFamily::Fgsm) {
        a.steps = 1;
        a.step_size = a.epsilon;
    }
    return a;
}

std::vector<std::size_t> sample_indices(std::size_t total, int m, Rng rng) {
    if (static_cast<std::size_t>(m) > total) {
        throw DataError("requested " + std::to_string(m) + " samples from a split of " +
                        std::to_string(total));
    }
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(m));
    return idx;
}

std::vector<int> policy_classes(const ExperimentConfig& cfg, int n_classes) {
    std::vector<int> classes(static_cast<std::size_t>(n_classes));
    std::iota(classes.begin(), classes.end(), 1);
    if (cfg.target_policy == ExperimentConfig::TargetPolicy::RandomSubset &&
        cfg.target_subset_size < n_classes) {
        Rng rng(cfg.target_seed);
        rng.shuffle(classes);
        classes.resize(static_cast<std::size_t>(cfg.target_subset_size));
        std::sort(classes.begin(), classes.end());
    }
    return classes;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

AveragedDistance averaged_distance(const std::vector<std::optional<double>>& distances) {
    if (distances.empty()) throw DataError("averaged_distance: no distances");
    AveragedDistance out;
    double sum = 0.0;
    for (const auto& d : distances) {
        if (d) {
            sum += *d;
            ++out.used;
        } else {
            ++out.unreached;
        }
    }
    if (out.used == 0) throw DataError("averaged_distance: every entry is unreached");
    out.mean = sum / static_cast<double>(out.used);
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    const auto out_path = [&cfg](const std::string& name) {
        return (fs::path(cfg.output_dir) / name).string();
    };

    SplitData data = resolve_dataset(cfg);
    const int n = data.train.num_classes;
    for (double l : cfg.lambdas) {
        if (!(l > 1.0 / n && l <= 1.0)) {
            throw ConfigError("grid lambda " + format_label(l) + " outside (1/" +
                              std::to_string(n) + ", 1]");
        }
    }

    ExperimentResult result;
    result.lambdas = cfg.lambdas;
    result.temperatures = cfg.temperatures;

    // train or load
    Classifier model;
    if (!cfg.checkpoint.empty()) {
        model = Classifier::load(cfg.checkpoint);
        if (model.num_classes() != n || model.input_shape() != data.train.input_shape) {
            throw DataError("checkpoint does not match the dataset shape/classes");
        }
    } else {
        model = build_model(cfg, data.train);
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seed;
        tc.threads = cfg.threads;
        tc.log_path = out_path("train_log.jsonl");
        if (tc.adversarial) {
            train_pgd_at(model, data.train, tc);
        } else {
            train_normal(model, data.train, tc);
        }
        model.save(out_path("model.json"));
        result.written_files.push_back(out_path("model.json"));
        result.written_files.push_back(out_path("train_log.jsonl"));
    }
    model.set_trainable(false);

    result.train_accuracy = evaluate_accuracy(model, data.train, std::nullopt, cfg.threads);
    result.test_accuracy = evaluate_accuracy(model, data.test, std::nullopt, cfg.threads);

    // sample the audited populations: members from train, non-members from test
    const std::vector<std::size_t> member_idx =
        sample_indices(data.train.size(), cfg.members, Rng::derive(cfg.seed, 1));
    const std::vector<std::size_t> nonmember_idx =
        sample_indices(data.test.size(), cfg.members, Rng::derive(cfg.seed, 2));
    const std::size_t m = member_idx.size();
    const std::size_t total = 2 * m;

    // grid cells, T-major; (lambda=1, T=1) is always computed (it is the
    // adv-distance special case) but only emitted when it is a grid cell
    struct Cell {
        double lambda, temperature;
        bool in_grid;
    };
    std::vector<Cell> cells;
    std::ptrdiff_t adv_cell = -1;
    for (double t : cfg.temperatures) {
        for (double l : cfg.lambdas) {
            cells.push_back({l, t, true});
            if (l == 1.0 && t == 1.0) adv_cell = static_cast<std::ptrdiff_t>(cells.size()) - 1;
        }
    }
    if (adv_cell < 0) {
        cells.push_back({1.0, 1.0, false});
        adv_cell = static_cast<std::ptrdiff_t>(cells.size()) - 1;
    }
    const std::size_t n_cells = cells.size();
    const std::size_t n_grid_cells = cfg.temperatures.size() * cfg.lambdas.size();

    const std::vector<int> base_targets = policy_classes(cfg, n);
    const AttackConfig sm_cfg = smadv_attack(cfg);
    const AttackConfig& atk = cfg.attack;

    result.records.assign(total, AuditRecord{});
    // per example, per cell, per target distances for the averaged tables
    std::vector<std::vector<std::vector<std::optional<double>>>> dists(total);

    parallel_for(total, cfg.threads, [&](std::size_t i) {
        const bool is_member = i < m;
        const Dataset& split = is_member ? data.train : data.test;
        const std::size_t idx = is_member ? member_idx[i] : nonmember_idx[i - m];
        const Tensor x = split.example(idx);
        const int k = split.label(idx);

        AuditRecord rec;
        rec.id = static_cast<int>(i);
        rec.member = is_member;
        rec.true_class = k;
        rec.correctness = score_correctness(model, x, k);
        rec.confidence = score_confidence(model, x);
        rec.cross_entropy = score_cross_entropy(model, x, k);
        rec.entropy = score_entropy(model, x);
        rec.m_entropy = score_m_entropy(model, x, k);
        rec.sm_adv = score_sm_adv(model, x, sm_cfg);

        const int predicted = model.predicted_class(x);
        std::vector<int> targets;
        for (int t : base_targets) {
            if (t != k && t != predicted) targets.push_back(t);
        }

        rec.dd.assign(n_grid_cells, std::nullopt);
        auto& cell_dists = dists[i];
        cell_dists.assign(n_cells, {});
        for (std::size_t ci = 0; ci < n_cells; ++ci) {
            std::optional<double> best;
            auto& per_target = cell_dists[ci];
            per_target.reserve(targets.size());
            for (int t : targets) {
                DirectionalResult r = directional_distance(
                    model, x, t, cells[ci].lambda, cells[ci].temperature, atk.alpha,
                    atk.max_iters, atk.cw_step_size, atk.box_lo, atk.box_hi);
                if (r.reached) {
                    per_target.push_back(r.distance);
                    if (!best || r.distance < *best) best = r.distance;
                } else {
                    per_target.push_back(std::nullopt);
                }
            }
            if (cells[ci].in_grid) rec.dd[ci] = best;
            if (static_cast<std::ptrdiff_t>(ci) == adv_cell) rec.adv_distance = best;
        }
        result.records[i] = std::move(rec);
    });

    // flush the per-example records before the aggregation phase
    const std::string audit_csv =
        audit_records_csv(result.records, cfg.lambdas, cfg.temperatures);
    write_text(out_path("audit.csv"), audit_csv);
    result.written_files.push_back(out_path("audit.csv"));

    // averaged distance tables (member / non-member)
    auto make_dist_table = [&](bool member_pop) {
        ReportTable tab;
        tab.name = member_pop ? "dist_member" : "dist_nonmember";
        tab.population = member_pop ? "member" : "nonmember";
        tab.temperatures = cfg.temperatures;
        tab.lambdas = cfg.lambdas;
        tab.cells.assign(cfg.temperatures.size(),
                         std::vector<std::optional<double>>(cfg.lambdas.size()));
        tab.unreached.assign(cfg.temperatures.size(),
                             std::vector<std::size_t>(cfg.lambdas.size(), 0));
        for (std::size_t ti = 0; ti < cfg.temperatures.size(); ++ti) {
            for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
                const std::size_t ci = ti * cfg.lambdas.size() + li;
                std::vector<std::optional<double>> pool;
                for (std::size_t i = 0; i < total; ++i) {
                    if (result.records[i].member != member_pop) continue;
                    const auto& per_target = dists[i][ci];
                    pool.insert(pool.end(), per_target.begin(), per_target.end());
                }
                if (pool.empty()) continue;
                std::size_t reached = 0;
                for (const auto& d : pool) reached += d.has_value() ? 1 : 0;
                if (reached == 0) {
                    tab.unreached[ti][li] = pool.size();
                    continue;
                }
                AveragedDistance avg = averaged_distance(pool);
                tab.cells[ti][li] = avg.mean;
                tab.unreached[ti][li] = avg.unreached;
            }
        }
        return tab;
    };
    result.member_dist = make_dist_table(true);
    result.nonmember_dist = make_dist_table(false);

    // per-cell best-threshold inference accuracy on the min-distance metric
    result.acc_table.name = "acc_idd";
    result.acc_table.population = "combined";
    result.acc_table.temperatures = cfg.temperatures;
    result.acc_table.lambdas = cfg.lambdas;
    result.acc_table.cells.assign(cfg.temperatures.size(),
                                  std::vector<std::optional<double>>(cfg.lambdas.size()));
    result.acc_table.unreached.assign(cfg.temperatures.size(),
                                      std::vector<std::size_t>(cfg.lambdas.size(), 0));
    ComparisonRow dd_row;
    dd_row.metric = "I_dd";
    dd_row.direction = "above";
    dd_row.acc_inf = -1.0;
    for (std::size_t ti = 0; ti < cfg.temperatures.size(); ++ti) {
        for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
            const std::size_t cell_idx = ti * cfg.lambdas.size() + li;
            std::vector<double> ms, ns;
            for (const auto& rec : result.records) {
                const double v = rec.dd[cell_idx] ? *rec.dd[cell_idx] : kInf;
                (rec.member ? ms : ns).push_back(v);
            }
            ThresholdDecision dec = best_threshold(ms, ns, Direction::MemberIfAbove, "I_dd");
            result.acc_table.cells[ti][li] = dec.acc_inf;
            if (dec.acc_inf > dd_row.acc_inf) {
                dd_row.acc_inf = dec.acc_inf;
                dd_row.tau = dec.tau;
                dd_row.lambda = cfg.lambdas[li];
                dd_row.temperature = cfg.temperatures[ti];
            }
        }
    }

    // comparison table: the seven metric rows
    result.comparison.clear();
    result.comparison.push_back(dd_row);
    auto flags_row = [&](const std::string& name, auto getter) {
        std::vector<int> mf, nf;
        for (const auto& rec : result.records) {
            (rec.member ? mf : nf).push_back(getter(rec));
        }
        ComparisonRow row;
        row.metric = name;
        row.direction = "flag";
        row.acc_inf = inference_accuracy(mf, nf);
        return row;
    };
    result.comparison.push_back(
        flags_row("I_sm_adv", [](const AuditRecord& r) { return r.sm_adv; }));
    result.comparison.push_back(
        flags_row("I_bl", [](const AuditRecord& r) { return r.correctness; }));
    auto sweep_row = [&](const std::string& name, Direction dir, auto getter) {
        std::vector<double> ms, ns;
        for (const auto& rec : result.records) {
            (rec.member ? ms : ns).push_back(getter(rec));
        }
        ThresholdDecision dec = best_threshold(ms, ns, dir, name);
        ComparisonRow row;
        row.metric = name;
        row.direction = dir == Direction::MemberIfAbove ? "above" : "below";
        row.acc_inf = dec.acc_inf;
        row.tau = dec.tau;
        return row;
    };
    result.comparison.push_back(sweep_row("I_cfs", Direction::MemberIfAbove,
                                          [](const AuditRecord& r) { return r.confidence; }));
    result.comparison.push_back(sweep_row("I_CE", Direction::MemberIfBelow,
                                          [](const AuditRecord& r) { return r.cross_entropy; }));
    result.comparison.push_back(sweep_row("I_entropy", Direction::MemberIfBelow,
                                          [](const AuditRecord& r) { return r.entropy; }));
    result.comparison.push_back(sweep_row("I_m_entropy", Direction::MemberIfBelow,
                                          [](const AuditRecord& r) { return r.m_entropy; }));

    // emit all tables + the machine-readable bundle
    for (const ReportTable* tab :
         {&result.member_dist, &result.nonmember_dist, &result.acc_table}) {
        const std::string path = out_path(tab->name + ".csv");
        write_text(path, table_csv(*tab));
        result.written_files.push_back(path);
    }
    write_text(out_path("comparison.csv"), comparison_csv(result.comparison));
    result.written_files.push_back(out_path("comparison.csv"));
    write_text(out_path("report.json"), report_bundle_json(result, cfg));
    result.written_files.push_back(out_path("report.json"));
    return result;
}

std::string table_csv(const ReportTable& table) {
    std::ostringstream os;
    os << "T";
    for (double l : table.lambdas) os << "," << format_label(l);
    os << "\n";
    for (std::size_t ti = 0; ti < table.temperatures.size(); ++ti) {
        os << format_label(table.temperatures[ti]);
        for (std::size_t li = 0; li < table.lambdas.size(); ++li) {
            os << ",";
            const auto& c = table.cells[ti][li];
            os << (c ? format3(*c) : std::string("unreached"));
        }
        os << "\n";
    }
    return os.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream os;
    os << "metric,acc_inf,tau,direction,lambda,T\n";
    for (const auto& r : rows) {
        os << r.metric << "," << format3(r.acc_inf) << ",";
        if (r.tau) {
            if (std::isinf(*r.tau)) {
                os << (*r.tau > 0 ? "inf" : "-inf");
            } else {
                os << format_full(*r.tau);
            }
        }
        os << "," << r.direction << ",";
        if (r.lambda) os << format_label(*r.lambda);
        os << ",";
        if (r.temperature) os << format_label(*r.temperature);
        os << "\n";
    }
    return os.str();
}

namespace {

nlohmann::json table_to_json(const ReportTable& tab) {
    nlohmann::json j;
    j["name"] = tab.name;
    j["population"] = tab.population;
    j["temperatures"] = tab.temperatures;
    j["lambdas"] = tab.lambdas;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& row : tab.cells) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& c : row) {
            if (c) r.push_back(*c);
            else r.push_back(nullptr);
        }
        cells.push_back(std::move(r));
    }
    j["cells"] = std::move(cells);
    j["unreached"] = tab.unreached;
    return j;
}

ReportTable table_from_json(const nlohmann::json& j) {
    ReportTable tab;
    tab.name = j.at("name").get<std::string>();
    tab.population = j.at("population").get<std::string>();
    tab.temperatures = j.at("temperatures").get<std::vector<double>>();
    tab.lambdas = j.at("lambdas").get<std::vector<double>>();
    for (const auto& row : j.at("cells")) {
        std::vector<std::optional<double>> r;
        for (const auto& c : row) {
            if (c.is_null()) r.push_back(std::nullopt);
            else r.push_back(c.get<double>());
        }
        tab.cells.push_back(std::move(r));
    }
    tab.unreached = j.at("unreached").get<std::vector<std::vector<std::size_t>>>();
    return tab;
}

}  // namespace

std::string report_bundle_json(const ExperimentResult& result, const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["format"] = "miaudit-report";
    j["version"] = 1;
    j["lambdas"] = result.lambdas;
    j["temperatures"] = result.temperatures;
    j["tables"] = nlohmann::json::array();
    for (const ReportTable* tab :
         {&result.member_dist, &result.nonmember_dist, &result.acc_table}) {
        j["tables"].push_back(table_to_json(*tab));
    }
    j["comparison"] = nlohmann::json::array();
    for (const auto& row : result.comparison) {
        nlohmann::json r;
        r["metric"] = row.metric;
        r["acc_inf"] = row.acc_inf;
        if (row.tau && !std::isinf(*row.tau)) r["tau"] = *row.tau;
        else if (row.tau) r["tau"] = *row.tau > 0 ? "inf" : "-inf";
        else r["tau"] = nullptr;
        r["direction"] = row.direction;
        if (row.lambda) r["lambda"] = *row.lambda;
        if (row.temperature) r["temperature"] = *row.temperature;
        j["comparison"].push_back(std::move(r));
    }
    nlohmann::json cfg_echo = nlohmann::json::array();
    for (const auto& [k, v] : cfg.echo()) cfg_echo.push_back({k, v});
    j["config"] = std::move(cfg_echo);
    j["summary"] = {{"train_accuracy", result.train_accuracy},
                    {"test_accuracy", result.test_accuracy}};
    return j.dump(2) + "\n";
}

std::vector<std::string> emit_report_from_bundle(const std::string& bundle_json,
                                                 const std::string& output_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bundle_json);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report bundle: invalid JSON: ") + e.what());
    }
    std::vector<std::string> written;
    try {
        if (j.at("format") != "miaudit-report") throw DataError("report bundle: bad format tag");
        fs::create_directories(output_dir);
        for (const auto& tj : j.at("tables")) {
            ReportTable tab = table_from_json(tj);
            const std::string path = (fs::path(output_dir) / (tab.name + ".csv")).string();
            write_text(path, table_csv(tab));
            written.push_back(path);
        }
        std::vector<ComparisonRow> rows;
        for (const auto& rj : j.at("comparison")) {
            ComparisonRow row;
            row.metric = rj.at("metric").get<std::string>();
            row.acc_inf = rj.at("acc_inf").get<double>();
            if (rj.contains("tau") && !rj.at("tau").is_null()) {
                if (rj.at("tau").is_string()) {
                    row.tau = rj.at("tau").get<std::string>() == "inf" ? kInf : -kInf;
                } else {
                    row.tau = rj.at("tau").get<double>();
                }
            }
            row.direction = rj.at("direction").get<std::string>();
            if (rj.contains("lambda")) row.lambda = rj.at("lambda").get<double>();
            if (rj.contains("temperature")) row.temperature = rj.at("temperature").get<double>();
            rows.push_back(std::move(row));
        }
        const std::string path = (fs::path(output_dir) / "comparison.csv").string();
        write_text(path, comparison_csv(rows));
        written.push_back(path);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report bundle: missing or malformed field: ") + e.what());
    }
    return written;
}

TrainRunResult run_training(const ExperimentConfig& cfg, bool adversarial) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    SplitData data = resolve_dataset(cfg);
    Classifier model = build_model(cfg, data.train);

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.threads = cfg.threads;
    tc.adversarial = adversarial;
    if (!adversarial) {
        tc.adv_epsilon = 0.0;
        tc.adv_steps = 0;
        tc.adv_step_size = 0.0;
    } else if (!(tc.adv_epsilon > 0.0)) {
        throw ConfigError("advtrain requires train.adversarial settings (adv_epsilon > 0)");
    }
    tc.log_path = (fs::path(cfg.output_dir) / "train_log.jsonl").string();
    if (adversarial) {
        train_pgd_at(model, data.train, tc);
    } else {
        train_normal(model, data.train, tc);
    }

    TrainRunResult r;
    r.checkpoint_path = (fs::path(cfg.output_dir) / "model.json").string();
    model.save(r.checkpoint_path);
    r.train_accuracy = evaluate_accuracy(model, data.train, std::nullopt, cfg.threads);
    r.test_accuracy = evaluate_accuracy(model, data.test, std::nullopt, cfg.threads);
    r.adv_accuracy = evaluate_accuracy(model, data.test, smadv_attack(cfg), cfg.threads);
    return r;
}

std::string run_attack_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.checkpoint.empty()) {
        throw ConfigError("attack requires model.checkpoint to be set");
    }
    fs::create_directories(cfg.output_dir);
    SplitData data = resolve_dataset(cfg);
    Classifier model = Classifier::load(cfg.checkpoint);
    if (model.num_classes() != data.train.num_classes ||
        model.input_shape() != data.train.input_shape) {
        throw DataError("checkpoint does not match the dataset shape/classes");
    }
    model.set_trainable(false);

    const std::vector<std::size_t> member_idx =
        sample_indices(data.train.size(), cfg.members, Rng::derive(cfg.seed, 1));
    const std::vector<std::size_t> nonmember_idx =
        sample_indices(data.test.size(), cfg.members, Rng::derive(cfg.seed, 2));
    const std::size_t m = member_idx.size();
    const std::size_t total = 2 * m;
    const std::vector<int> base_targets = policy_classes(cfg, data.train.num_classes);

    fs::path trace_dir;
    if (cfg.trace_attacks) {
        trace_dir = fs::path(cfg.output_dir) / "traces";
        fs::create_directories(trace_dir);
    }

    struct Row {
        std::size_t id;
        bool member;
        int true_class;
        bool success;
        std::optional<double> distance;
        int iterations;
    };
    std::vector<Row> rows(total);
    const AttackConfig atk = smadv_attack(cfg);
    parallel_for(total, cfg.threads, [&](std::size_t i) {
        const bool is_member = i < m;
        const Dataset& split = is_member ? data.train : data.test;
        const std::size_t idx = is_member ? member_idx[i] : nonmember_idx[i - m];
        const Tensor x = split.example(idx);
        Row row;
        row.id = i;
        row.member = is_member;
        row.true_class = split.label(idx);
        if (cfg.attack.family == AttackFamily::Cw) {
            const int predicted = model.predicted_class(x);
            std::vector<int> targets;
            for (int t : base_targets) {
                if (t != row.true_class && t != predicted) targets.push_back(t);
            }
            std::optional<double> best;
            for (int t : targets) {
                AttackTrace trace;
                std::shared_ptr<std::ofstream> trace_file;
                if (cfg.trace_attacks) {
                    auto path = trace_dir / ("attack_" + std::to_string(i) + "_t" +
                                             std::to_string(t) + ".jsonl");
                    trace_file = std::make_shared<std::ofstream>(path.string(), std::ios::binary);
                    trace = [trace_file](int iter, double ce, double dist, double obj) {
                        nlohmann::json line;
                        line["iteration"] = iter;
                        line["ce"] = ce;
                        line["distance"] = dist;
                        line["objective"] = obj;
                        (*trace_file) << line.dump() << "\n";
                    };
                }
                DirectionalResult r = directional_distance(
                    model, x, t, cfg.attack.lambda, cfg.attack.temperature, cfg.attack.alpha,
                    cfg.attack.max_iters, cfg.attack.cw_step_size, cfg.attack.box_lo,
                    cfg.attack.box_hi, trace);
                if (r.reached && (!best || r.distance < *best)) best = r.distance;
            }
            row.success = best.has_value();
            row.distance = best;
            row.iterations = cfg.attack.max_iters;
        } else {
            AttackOutcome out = untargeted_attack(model, x, atk);
            row.success = out.success;
            row.distance = out.l2_distance;
            row.iterations = out.iterations;
        }
        rows[i] = std::move(row);
    });

    std::ostringstream os;
    os << "id,member,true_class,success,l2_distance,iterations\n";
    for (const auto& row : rows) {
        os << row.id << "," << (row.member ? 1 : 0) << "," << row.true_class << ","
           << (row.success ? 1 : 0) << ","
           << (row.distance ? format_full(*row.distance) : std::string("unreached")) << ","
           << row.iterations << "\n";
    }
    const std::string path = (fs::path(cfg.output_dir) / "attack_outcomes.csv").string();
    write_text(path, os.str());
    return path;
}

}  // namespace miaudit
