#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "wdtl.h"

namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("wdtl_capi_" + name);
}

// Config handle scaled down far enough for a fast end-to-end pass.
wdtl_config* tiny_config() {
    wdtl_config* cfg = wdtl_config_new();
    REQUIRE(wdtl_config_set(cfg, "synth_n_per_class", "8") == WDTL_OK);
    REQUIRE(wdtl_config_set(cfg, "batch_size", "8") == WDTL_OK);
    REQUIRE(wdtl_config_set(cfg, "critic_steps", "2") == WDTL_OK);
    REQUIRE(wdtl_config_set(cfg, "max_iterations", "3") == WDTL_OK);
    REQUIRE(wdtl_config_set(cfg, "eval_every", "1") == WDTL_OK);
    REQUIRE(wdtl_config_set(cfg, "seed", "21") == WDTL_OK);
    return cfg;
}

} // namespace

TEST_CASE("config set/get and unknown keys") {
    wdtl_config* cfg = wdtl_config_new();
    CHECK(wdtl_config_set(cfg, "lambda", "0.8") == WDTL_OK);
    char buf[64];
    CHECK(wdtl_config_get(cfg, "lambda", buf, sizeof(buf)) == WDTL_OK);
    CHECK(std::string(buf) == "0.8");
    CHECK(wdtl_config_set(cfg, "nonsense", "1") == WDTL_USAGE_ERROR);
    CHECK(std::string(wdtl_last_error()).find("nonsense") != std::string::npos);
    CHECK(wdtl_config_get(cfg, "lambda", buf, 2) == WDTL_USAGE_ERROR);
    wdtl_config_free(cfg);
}

TEST_CASE("config load reports notices for defaulted keys") {
    const auto path = temp_file("run.cfg");
    std::ofstream(path) << "batch_size = 8\nseed = 5\n";
    wdtl_config* cfg = wdtl_config_new();
    REQUIRE(wdtl_config_load(cfg, path.string().c_str()) == WDTL_OK);
    int notices = 0;
    bool saw_lambda = false;
    for (int i = 0;; ++i) {
        const char* n = wdtl_config_notice(cfg, i);
        if (!n) break;
        ++notices;
        if (std::string(n).find("lambda") != std::string::npos) saw_lambda = true;
    }
    CHECK(notices > 0);
    CHECK(saw_lambda);
    wdtl_config_free(cfg);
    fs::remove(path);
}

TEST_CASE("missing config file maps to an io error") {
    wdtl_config* cfg = wdtl_config_new();
    CHECK(wdtl_config_load(cfg, "/nonexistent/path.cfg") == WDTL_IO_ERROR);
    wdtl_config_free(cfg);
}

TEST_CASE("null arguments are usage errors") {
    CHECK(wdtl_dataset_load(nullptr, nullptr) == WDTL_USAGE_ERROR);
    CHECK(wdtl_config_load(nullptr, "x") == WDTL_USAGE_ERROR);
    CHECK(wdtl_dataset_size(nullptr) == -1);
}

TEST_CASE("full pipeline through the C surface") {
    wdtl_config* cfg = tiny_config();

    // source and target domains
    wdtl_dataset* source = nullptr;
    REQUIRE(wdtl_synth(cfg, &source) == WDTL_OK);
    CHECK(wdtl_dataset_size(source) == 32);

    REQUIRE(wdtl_config_set(cfg, "synth_shaft_hz", "29") == WDTL_OK);
    REQUIRE(wdtl_config_set(cfg, "seed", "22") == WDTL_OK);
    wdtl_dataset* target = nullptr;
    REQUIRE(wdtl_synth(cfg, &target) == WDTL_OK);
    REQUIRE(wdtl_config_set(cfg, "seed", "21") == WDTL_OK);

    // dataset save/load round-trip
    const auto ds_path = temp_file("source.bin");
    REQUIRE(wdtl_dataset_save(source, ds_path.string().c_str(), "binary") == WDTL_OK);
    wdtl_dataset* loaded = nullptr;
    REQUIRE(wdtl_dataset_load(ds_path.string().c_str(), &loaded) == WDTL_OK);
    CHECK(wdtl_dataset_size(loaded) == 32);

    // corrupted file maps to a data error
    {
        std::ofstream bad(ds_path, std::ios::binary);
        bad << "WDTL";
    }
    wdtl_dataset* broken = nullptr;
    CHECK(wdtl_dataset_load(ds_path.string().c_str(), &broken) == WDTL_DATA_ERROR);
    CHECK(std::strlen(wdtl_last_error()) > 0);

    // pretrain -> checkpoint + report
    wdtl_checkpoint* pre = nullptr;
    wdtl_report* pre_report = nullptr;
    REQUIRE(wdtl_pretrain(cfg, source, &pre, &pre_report) == WDTL_OK);
    const auto ckpt_path = temp_file("pre.ckpt");
    REQUIRE(wdtl_checkpoint_save(pre, ckpt_path.string().c_str()) == WDTL_OK);
    wdtl_checkpoint* pre_loaded = nullptr;
    REQUIRE(wdtl_checkpoint_load(ckpt_path.string().c_str(), &pre_loaded) == WDTL_OK);

    // adapt, unsupervised
    wdtl_checkpoint* best = nullptr;
    wdtl_report* report = nullptr;
    REQUIRE(wdtl_adapt(cfg, source, target, pre_loaded, nullptr, &best,
                       &report) == WDTL_OK);
    CHECK(wdtl_report_best_accuracy(report) >= 0.0);
    CHECK(wdtl_report_best_accuracy(report) <= 1.0);

    // adapt, supervised with a labeled subset
    wdtl_dataset* labeled = nullptr;
    REQUIRE(wdtl_dataset_label_subset(target, 2, 5, &labeled) == WDTL_OK);
    CHECK(wdtl_dataset_size(labeled) == 8);
    wdtl_checkpoint* best_sup = nullptr;
    REQUIRE(wdtl_adapt(cfg, source, target, pre_loaded, labeled, &best_sup,
                       nullptr) == WDTL_OK);

    // evaluate with confusion counts
    double accuracy = -1.0;
    int64_t confusion[16];
    REQUIRE(wdtl_evaluate(best, target, &accuracy, confusion) == WDTL_OK);
    int64_t total = 0;
    for (int i = 0; i < 16; ++i) total += confusion[i];
    CHECK(total == wdtl_dataset_size(target));
    CHECK(accuracy >= 0.0);

    // report json + feature export
    const auto rep_path = temp_file("report.json");
    REQUIRE(wdtl_report_save_json(report, rep_path.string().c_str()) == WDTL_OK);
    CHECK(fs::file_size(rep_path) > 0);
    const auto feat_path = temp_file("features.csv");
    REQUIRE(wdtl_export_features(best, target, feat_path.string().c_str()) == WDTL_OK);
    CHECK(fs::file_size(feat_path) > 0);

    // aggregation
    const double accs[3] = {0.7, 0.8, 0.9};
    double mean = 0.0, ci = 0.0;
    REQUIRE(wdtl_aggregate(accs, 3, &mean, &ci) == WDTL_OK);
    CHECK(mean == doctest::Approx(0.8));
    CHECK(ci > 0.0);

    // hashing is stable and input-sensitive
    char h1[65], h2[65];
    REQUIRE(wdtl_hash_file(rep_path.string().c_str(), h1) == WDTL_OK);
    REQUIRE(wdtl_hash_file(rep_path.string().c_str(), h2) == WDTL_OK);
    CHECK(std::string(h1) == h2);
    CHECK(std::strlen(h1) == 64);
    REQUIRE(wdtl_hash_file(feat_path.string().c_str(), h2) == WDTL_OK);
    CHECK(std::string(h1) != h2);
    CHECK(wdtl_hash_file("/nonexistent", h1) == WDTL_IO_ERROR);

    wdtl_report_free(pre_report);
    wdtl_report_free(report);
    wdtl_checkpoint_free(pre);
    wdtl_checkpoint_free(pre_loaded);
    wdtl_checkpoint_free(best);
    wdtl_checkpoint_free(best_sup);
    wdtl_dataset_free(source);
    wdtl_dataset_free(target);
    wdtl_dataset_free(loaded);
    wdtl_dataset_free(labeled);
    wdtl_config_free(cfg);
    fs::remove(ds_path);
    fs::remove(ckpt_path);
    fs::remove(rep_path);
    fs::remove(feat_path);
}
