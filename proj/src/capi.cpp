#include "miaudit.h"

#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>

#include "miaudit/config.hpp"
#include "miaudit/experiment.hpp"
#include "miaudit/model.hpp"

namespace {

thread_local std::string g_last_error;

int wrap(const std::function<void()>& fn) {
    try {
        fn();
        g_last_error.clear();
        return MIA_OK;
    } catch (const miaudit::Error& e) {
        g_last_error = e.what();
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MIA_ERR_NUMERIC;
    } catch (...) {
        g_last_error = "unknown error";
        return MIA_ERR_NUMERIC;
    }
}

}  // namespace

struct mia_config_s {
    miaudit::ExperimentConfig cfg;
};

struct mia_model_s {
    miaudit::Classifier model;
};

extern "C" {

const char* mia_version(void) { return "0.1.0"; }

const char* mia_last_error(void) { return g_last_error.c_str(); }

int mia_config_load(const char* path, mia_config** out) {
    return wrap([&] {
        if (!path || !out) throw miaudit::ConfigError("mia_config_load: null argument");
        auto cfg = std::make_unique<mia_config>();
        cfg->cfg = miaudit::ExperimentConfig::from_file(path);
        *out = cfg.release();
    });
}

int mia_config_parse(const char* text, mia_config** out) {
    return wrap([&] {
        if (!text || !out) throw miaudit::ConfigError("mia_config_parse: null argument");
        auto cfg = std::make_unique<mia_config>();
        cfg->cfg = miaudit::ExperimentConfig::from_string(text);
        *out = cfg.release();
    });
}

int mia_config_override(mia_config* cfg, const char* dotted_key, const char* value) {
    return wrap([&] {
        if (!cfg || !dotted_key || !value) {
            throw miaudit::ConfigError("mia_config_override: null argument");
        }
        cfg->cfg.set(dotted_key, value);
        cfg->cfg.validate();
    });
}

void mia_config_free(mia_config* cfg) { delete cfg; }

int mia_train(const mia_config* cfg, int adversarial, const char* output_dir,
              double* train_accuracy, double* test_accuracy, double* adv_accuracy) {
    return wrap([&] {
        if (!cfg) throw miaudit::ConfigError("mia_train: null config");
        miaudit::ExperimentConfig c = cfg->cfg;
        if (output_dir) c.output_dir = output_dir;
        miaudit::TrainRunResult r = miaudit::run_training(c, adversarial != 0);
        if (train_accuracy) *train_accuracy = r.train_accuracy;
        if (test_accuracy) *test_accuracy = r.test_accuracy;
        if (adv_accuracy) *adv_accuracy = r.adv_accuracy;
    });
}

int mia_attack(const mia_config* cfg, const char* output_dir) {
    return wrap([&] {
        if (!cfg) throw miaudit::ConfigError("mia_attack: null config");
        miaudit::ExperimentConfig c = cfg->cfg;
        if (output_dir) c.output_dir = output_dir;
        miaudit::run_attack_sweep(c);
    });
}

int mia_audit(const mia_config* cfg, const char* output_dir) {
    return wrap([&] {
        if (!cfg) throw miaudit::ConfigError("mia_audit: null config");
        miaudit::ExperimentConfig c = cfg->cfg;
        if (output_dir) c.output_dir = output_dir;
        miaudit::run_experiment(c);
    });
}

int mia_report(const char* bundle_path, const char* output_dir) {
    return wrap([&] {
        if (!bundle_path || !output_dir) {
            throw miaudit::ConfigError("mia_report: null argument");
        }
        std::ifstream in(bundle_path, std::ios::binary);
        if (!in) throw miaudit::DataError(std::string("cannot open bundle: ") + bundle_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        miaudit::emit_report_from_bundle(ss.str(), output_dir);
    });
}

int mia_model_load(const char* path, mia_model** out) {
    return wrap([&] {
        if (!path || !out) throw miaudit::ConfigError("mia_model_load: null argument");
        auto m = std::make_unique<mia_model>();
        m->model = miaudit::Classifier::load(path);
        *out = m.release();
    });
}

void mia_model_free(mia_model* model) { delete model; }

int mia_model_num_classes(const mia_model* model, int* out) {
    return wrap([&] {
        if (!model || !out) throw miaudit::ConfigError("mia_model_num_classes: null argument");
        *out = model->model.num_classes();
    });
}

int mia_model_input_size(const mia_model* model, size_t* out) {
    return wrap([&] {
        if (!model || !out) throw miaudit::ConfigError("mia_model_input_size: null argument");
        *out = miaudit::shape_size(model->model.input_shape());
    });
}

int mia_model_predict(const mia_model* model, const double* x, size_t x_len, double temperature,
                      double* probs_out, size_t probs_len) {
    return wrap([&] {
        if (!model || !x || !probs_out) {
            throw miaudit::ConfigError("mia_model_predict: null argument");
        }
        const auto& shape = model->model.input_shape();
        if (x_len != miaudit::shape_size(shape)) {
            throw miaudit::ConfigError("mia_model_predict: input length mismatch");
        }
        if (probs_len != static_cast<size_t>(model->model.num_classes())) {
            throw miaudit::ConfigError("mia_model_predict: probs length mismatch");
        }
        miaudit::Tensor xt =
            miaudit::Tensor::from_values(shape, std::vector<double>(x, x + x_len));
        const auto probs = model->model.predict_probs(xt, temperature).probs();
        for (size_t i = 0; i < probs.size(); ++i) probs_out[i] = probs[i];
    });
}

}  // extern "C"
