// extern-C surface of the shared library. Handles wrap the C++ types;
// every call traps exceptions and maps them to status codes.

#include "wdtl.h"

#include <cstring>
#include <fstream>
#include <string>

#include <openssl/evp.h>

#include "config.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "training.hpp"

using namespace wdtl;

struct wdtl_config_s {
    RunConfig cfg;
};
struct wdtl_dataset_s {
    Dataset ds;
};
struct wdtl_checkpoint_s {
    ModelCheckpoint ckpt;
};
struct wdtl_report_s {
    RunReport report;
};

namespace {

thread_local std::string g_last_error;

wdtl_status fail(wdtl_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

template <typename Fn>
wdtl_status guarded(Fn&& fn) {
    try {
        fn();
        return WDTL_OK;
    } catch (const FormatError& e) {
        return fail(WDTL_DATA_ERROR, e.what());
    } catch (const NumericError& e) {
        return fail(WDTL_NUMERIC_ERROR, e.what());
    } catch (const IoError& e) {
        return fail(WDTL_IO_ERROR, e.what());
    } catch (const ContractError& e) {
        return fail(WDTL_USAGE_ERROR, e.what());
    } catch (const std::exception& e) {
        return fail(WDTL_USAGE_ERROR, e.what());
    }
}

} // namespace

extern "C" {

const char* wdtl_last_error(void) { return g_last_error.c_str(); }

wdtl_config* wdtl_config_new(void) { return new wdtl_config_s{}; }

wdtl_status wdtl_config_load(wdtl_config* cfg, const char* path) {
    if (!cfg || !path) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] { cfg->cfg = RunConfig::from_file(path); });
}

wdtl_status wdtl_config_set(wdtl_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] { cfg->cfg.set(key, value); });
}

wdtl_status wdtl_config_get(const wdtl_config* cfg, const char* key, char* buf,
                            size_t buflen) {
    if (!cfg || !key || !buf) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        const std::string v = cfg->cfg.get(key);
        if (v.size() + 1 > buflen) throw ContractError("buffer too small");
        std::memcpy(buf, v.c_str(), v.size() + 1);
    });
}

const char* wdtl_config_notice(const wdtl_config* cfg, int index) {
    if (!cfg || index < 0 ||
        index >= static_cast<int>(cfg->cfg.notices.size()))
        return nullptr;
    return cfg->cfg.notices[index].c_str();
}

void wdtl_config_free(wdtl_config* cfg) { delete cfg; }

wdtl_status wdtl_synth(const wdtl_config* cfg, wdtl_dataset** out) {
    if (!cfg || !out) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        *out = new wdtl_dataset_s{synth_generate(cfg->cfg.synth)};
    });
}

wdtl_status wdtl_dataset_load(const char* path, wdtl_dataset** out) {
    if (!path || !out) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] { *out = new wdtl_dataset_s{load_dataset(path)}; });
}

wdtl_status wdtl_dataset_save(const wdtl_dataset* ds, const char* path,
                              const char* format) {
    if (!ds || !path || !format) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] { save_dataset(ds->ds, path, format); });
}

int64_t wdtl_dataset_size(const wdtl_dataset* ds) {
    return ds ? static_cast<int64_t>(ds->ds.samples.size()) : -1;
}

wdtl_status wdtl_dataset_label_subset(const wdtl_dataset* ds, int per_class,
                                      uint64_t seed, wdtl_dataset** out) {
    if (!ds || !out) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        *out = new wdtl_dataset_s{label_subset(ds->ds, per_class, seed)};
    });
}

void wdtl_dataset_free(wdtl_dataset* ds) { delete ds; }

wdtl_status wdtl_pretrain(const wdtl_config* cfg, const wdtl_dataset* source,
                          wdtl_checkpoint** ckpt, wdtl_report** report) {
    if (!cfg || !source || !ckpt) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        auto result = pretrain(source->ds, cfg->cfg.adapt);
        if (report) {
            RunReport r;
            r.best_accuracy = result.best_validation_accuracy;
            r.best_iteration = result.best.iteration;
            r.final_accuracy = result.best_validation_accuracy;
            for (size_t i = 0; i < result.loss_curve.size(); ++i) {
                if ((i + 1) % cfg->cfg.adapt.eval_every == 0 ||
                    i + 1 == result.loss_curve.size()) {
                    IterLog log;
                    log.iteration = static_cast<int>(i + 1);
                    log.l_c = result.loss_curve[i];
                    r.logs.push_back(log);
                }
            }
            *report = new wdtl_report_s{std::move(r)};
        }
        *ckpt = new wdtl_checkpoint_s{std::move(result.best)};
    });
}

wdtl_status wdtl_adapt(const wdtl_config* cfg, const wdtl_dataset* source,
                       const wdtl_dataset* target, const wdtl_checkpoint* init,
                       const wdtl_dataset* labeled_target,
                       wdtl_checkpoint** best, wdtl_report** report) {
    if (!cfg || !source || !target || !init || !best)
        return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        auto [ckpt, rep] =
            adapt(source->ds, target->ds, cfg->cfg.adapt, init->ckpt,
                  labeled_target ? &labeled_target->ds : nullptr);
        *best = new wdtl_checkpoint_s{std::move(ckpt)};
        if (report) *report = new wdtl_report_s{std::move(rep)};
    });
}

wdtl_status wdtl_checkpoint_save(const wdtl_checkpoint* ckpt, const char* path) {
    if (!ckpt || !path) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] { save_checkpoint(ckpt->ckpt, path); });
}

wdtl_status wdtl_checkpoint_load(const char* path, wdtl_checkpoint** out) {
    if (!path || !out) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] { *out = new wdtl_checkpoint_s{load_checkpoint(path)}; });
}

void wdtl_checkpoint_free(wdtl_checkpoint* ckpt) { delete ckpt; }

wdtl_status wdtl_evaluate(const wdtl_checkpoint* ckpt, const wdtl_dataset* ds,
                          double* accuracy, int64_t confusion[16]) {
    if (!ckpt || !ds || !accuracy) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        const auto ev = evaluate(ckpt->ckpt.model.extractor,
                                 ckpt->ckpt.model.discriminator, ds->ds);
        *accuracy = ev.accuracy;
        if (confusion)
            for (int r = 0; r < kNumClasses; ++r)
                for (int c = 0; c < kNumClasses; ++c)
                    confusion[r * kNumClasses + c] = ev.confusion[r][c];
    });
}

wdtl_status wdtl_export_features(const wdtl_checkpoint* ckpt,
                                 const wdtl_dataset* ds, const char* path) {
    if (!ckpt || !ds || !path) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        export_features(ckpt->ckpt.model.extractor, ds->ds, path);
    });
}

wdtl_status wdtl_report_save_json(const wdtl_report* report, const char* path) {
    if (!report || !path) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] { write_report_json(report->report, path); });
}

double wdtl_report_best_accuracy(const wdtl_report* report) {
    return report ? report->report.best_accuracy : -1.0;
}

double wdtl_report_final_accuracy(const wdtl_report* report) {
    return report ? report->report.final_accuracy : -1.0;
}

void wdtl_report_free(wdtl_report* report) { delete report; }

wdtl_status wdtl_aggregate(const double* values, int n, double* mean,
                           double* ci_half) {
    if (!values || !mean || !ci_half) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        const auto rep = aggregate(std::vector<double>(values, values + n));
        *mean = rep.mean;
        *ci_half = rep.ci_half_width;
    });
}

wdtl_status wdtl_hash_file(const char* path, char hex_out[65]) {
    if (!path || !hex_out) return fail(WDTL_USAGE_ERROR, "null argument");
    return guarded([&] {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError(std::string("cannot open: ") + path);
        EVP_MD_CTX* ctx = EVP_MD_CTX_new();
        if (!ctx) throw IoError("EVP_MD_CTX_new failed");
        EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
        char buf[65536];
        while (in) {
            in.read(buf, sizeof(buf));
            if (in.gcount() > 0)
                EVP_DigestUpdate(ctx, buf, static_cast<size_t>(in.gcount()));
        }
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx, digest, &len);
        EVP_MD_CTX_free(ctx);
        static const char* hex = "0123456789abcdef";
        for (unsigned int i = 0; i < len; ++i) {
            hex_out[2 * i] = hex[digest[i] >> 4];
            hex_out[2 * i + 1] = hex[digest[i] & 0xf];
        }
        hex_out[2 * len] = '\0';
    });
}

} // extern "C"
