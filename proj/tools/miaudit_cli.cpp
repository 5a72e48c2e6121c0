// miaudit command line: train / advtrain / attack / audit / report.
// Talks to the core exclusively through the miaudit.h C API.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "miaudit.h"

namespace {

struct ConfigDeleter {
    void operator()(mia_config* c) const { mia_config_free(c); }
};
using ConfigPtr = std::unique_ptr<mia_config, ConfigDeleter>;

int fail(int code) {
    std::fprintf(stderr, "error: %s\n", mia_last_error());
    return code;
}

int load_config(const std::string& path, const std::vector<std::string>& overrides,
                ConfigPtr& out) {
    mia_config* raw = nullptr;
    int rc = mia_config_load(path.c_str(), &raw);
    if (rc != MIA_OK) return rc;
    out.reset(raw);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects section.key=value, got '%s'\n",
                         kv.c_str());
            return MIA_ERR_CONFIG;
        }
        rc = mia_config_override(out.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (rc != MIA_OK) return rc;
    }
    return MIA_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"membership-inference audit toolkit"};
    app.set_version_flag("--version", std::string(mia_version()));
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::string bundle_path;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config) {
            cmd->add_option("-c,--config", config_path, "experiment config file")->required();
            cmd->add_option("--set", overrides,
                            "override a config value (section.key=value); flags win");
        }
        cmd->add_option("-o,--out", out_dir, "output directory (overrides config)");
    };

    CLI::App* train = app.add_subcommand("train", "train a model normally");
    add_common(train, true);
    CLI::App* advtrain = app.add_subcommand("advtrain", "train a model with PGD-AT");
    add_common(advtrain, true);
    CLI::App* attack = app.add_subcommand("attack", "run the configured attack sweep");
    add_common(attack, true);
    attack->add_option("--checkpoint", bundle_path, "model checkpoint (sets model.checkpoint)");
    CLI::App* audit = app.add_subcommand("audit", "run the full membership audit");
    add_common(audit, true);
    CLI::App* report = app.add_subcommand("report", "re-emit CSV tables from a report bundle");
    report->add_option("--bundle", bundle_path, "report.json produced by audit")->required();
    report->add_option("-o,--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (report->parsed()) {
        int rc = mia_report(bundle_path.c_str(), out_dir.c_str());
        if (rc != MIA_OK) return fail(rc);
        std::printf("tables written to %s\n", out_dir.c_str());
        return 0;
    }

    ConfigPtr cfg;
    int rc = load_config(config_path, overrides, cfg);
    if (rc != MIA_OK) return fail(rc);
    const char* out = out_dir.empty() ? nullptr : out_dir.c_str();

    if (train->parsed() || advtrain->parsed()) {
        const int adversarial = advtrain->parsed() ? 1 : 0;
        double train_acc = 0, test_acc = 0, adv_acc = 0;
        rc = mia_train(cfg.get(), adversarial, out, &train_acc, &test_acc, &adv_acc);
        if (rc != MIA_OK) return fail(rc);
        std::printf("train accuracy %.4f, test accuracy %.4f, adversarial accuracy %.4f\n",
                    train_acc, test_acc, adv_acc);
        return 0;
    }
    if (attack->parsed()) {
        if (!bundle_path.empty()) {
            rc = mia_config_override(cfg.get(), "model.checkpoint", bundle_path.c_str());
            if (rc != MIA_OK) return fail(rc);
        }
        rc = mia_attack(cfg.get(), out);
        if (rc != MIA_OK) return fail(rc);
        std::printf("attack outcomes written\n");
        return 0;
    }
    if (audit->parsed()) {
        rc = mia_audit(cfg.get(), out);
        if (rc != MIA_OK) return fail(rc);
        std::printf("audit artifacts written\n");
        return 0;
    }
    return 0;
}
