// Command-line front end. Talks to the library exclusively through the
// C API in wdtl.h; JSON handling for the report table lives here.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wdtl.h"

namespace fs = std::filesystem;

namespace {

int status_to_exit(wdtl_status s) {
    switch (s) {
        case WDTL_OK: return 0;
        case WDTL_USAGE_ERROR: return 1;
        case WDTL_DATA_ERROR: return 2;
        case WDTL_IO_ERROR: return 2;
        case WDTL_NUMERIC_ERROR: return 3;
    }
    return 1;
}

[[noreturn]] void die(wdtl_status s) {
    std::cerr << "error: " << wdtl_last_error() << "\n";
    std::exit(status_to_exit(s));
}

void check(wdtl_status s) {
    if (s != WDTL_OK) die(s);
}

struct ConfigHandle {
    wdtl_config* cfg = wdtl_config_new();
    ~ConfigHandle() { wdtl_config_free(cfg); }

    void load(const std::string& path) {
        check(wdtl_config_load(cfg, path.c_str()));
        for (int i = 0;; ++i) {
            const char* notice = wdtl_config_notice(cfg, i);
            if (!notice) break;
            std::cerr << "notice: " << notice << "\n";
        }
    }
    void set(const std::string& key, const std::string& value) {
        check(wdtl_config_set(cfg, key.c_str(), value.c_str()));
    }
    std::string get(const std::string& key) const {
        char buf[256];
        check(wdtl_config_get(cfg, key.c_str(), buf, sizeof(buf)));
        return buf;
    }
};

// Lists every artifact under `dir` with its content hash.
void write_manifest(const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), dir).string();
        if (rel == "manifest.txt") continue;
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::ofstream out(dir / "manifest.txt");
    for (const auto& rel : files) {
        char hash[65];
        check(wdtl_hash_file((dir / rel).string().c_str(), hash));
        out << hash << "  " << rel << "\n";
    }
}

void print_confusion(const int64_t confusion[16]) {
    static const char* names[4] = {"Normal", "InnerRace", "OuterRace", "Roller"};
    std::printf("%-10s", "truth\\pred");
    for (int c = 0; c < 4; ++c) std::printf("%12s", names[c]);
    std::printf("\n");
    for (int r = 0; r < 4; ++r) {
        std::printf("%-10s", names[r]);
        for (int c = 0; c < 4; ++c)
            std::printf("%12lld", static_cast<long long>(confusion[r * 4 + c]));
        std::printf("\n");
    }
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              const std::map<std::string, std::string>& overrides,
              const std::string& format) {
    ConfigHandle cfg;
    if (!config_path.empty()) cfg.load(config_path);
    for (const auto& [k, v] : overrides) cfg.set(k, v);

    wdtl_dataset* ds = nullptr;
    check(wdtl_synth(cfg.cfg, &ds));
    fs::create_directories(out_dir);
    const std::string ext = format == "csv" ? ".csv" : ".bin";
    const fs::path path = fs::path(out_dir) / ("dataset" + ext);
    check(wdtl_dataset_save(ds, path.string().c_str(), format.c_str()));
    std::cout << "wrote " << path.string() << " ("
              << wdtl_dataset_size(ds) << " samples, domain "
              << cfg.get("domain_tag") << ")\n";
    wdtl_dataset_free(ds);
    write_manifest(out_dir);
    return 0;
}

int cmd_pretrain(const std::string& config_path, const std::string& source_path,
                 const std::string& out_dir) {
    ConfigHandle cfg;
    if (!config_path.empty()) cfg.load(config_path);
    wdtl_dataset* source = nullptr;
    check(wdtl_dataset_load(source_path.c_str(), &source));
    wdtl_checkpoint* ckpt = nullptr;
    wdtl_report* report = nullptr;
    check(wdtl_pretrain(cfg.cfg, source, &ckpt, &report));
    fs::create_directories(out_dir);
    const fs::path ckpt_path = fs::path(out_dir) / "pretrained.ckpt";
    check(wdtl_checkpoint_save(ckpt, ckpt_path.string().c_str()));
    check(wdtl_report_save_json(
        report, (fs::path(out_dir) / "pretrain_report.json").string().c_str()));
    std::cout << "best validation accuracy: "
              << wdtl_report_best_accuracy(report) << "\n";
    wdtl_report_free(report);
    wdtl_checkpoint_free(ckpt);
    wdtl_dataset_free(source);
    write_manifest(out_dir);
    return 0;
}

int cmd_adapt(const std::string& config_path, const std::string& source_path,
              const std::string& target_path, const std::string& init_path,
              const std::string& labeled_path, const std::string& out_dir) {
    ConfigHandle cfg;
    if (!config_path.empty()) cfg.load(config_path);
    wdtl_dataset* source = nullptr;
    wdtl_dataset* target = nullptr;
    wdtl_checkpoint* init = nullptr;
    check(wdtl_dataset_load(source_path.c_str(), &source));
    check(wdtl_dataset_load(target_path.c_str(), &target));
    check(wdtl_checkpoint_load(init_path.c_str(), &init));

    wdtl_dataset* labeled = nullptr;
    if (!labeled_path.empty()) {
        check(wdtl_dataset_load(labeled_path.c_str(), &labeled));
    } else {
        const int per_class = std::stoi(cfg.get("labeled_per_class"));
        if (per_class > 0)
            check(wdtl_dataset_label_subset(
                target, per_class, std::stoull(cfg.get("seed")), &labeled));
    }

    const int runs = std::stoi(cfg.get("runs"));
    const uint64_t base_seed = std::stoull(cfg.get("seed"));
    fs::create_directories(out_dir);
    std::vector<double> best_accs;
    for (int r = 0; r < runs; ++r) {
        cfg.set("seed", std::to_string(base_seed + r));
        wdtl_checkpoint* best = nullptr;
        wdtl_report* report = nullptr;
        check(wdtl_adapt(cfg.cfg, source, target, init, labeled, &best, &report));
        const fs::path run_dir = fs::path(out_dir) / ("run_" + std::to_string(r));
        fs::create_directories(run_dir);
        check(wdtl_checkpoint_save(best, (run_dir / "adapted.ckpt").string().c_str()));
        check(wdtl_report_save_json(report, (run_dir / "report.json").string().c_str()));
        const double acc = wdtl_report_best_accuracy(report);
        std::cout << "run " << r << " (seed " << base_seed + r
                  << "): best target accuracy " << acc << "\n";
        if (acc >= 0.0) best_accs.push_back(acc);
        wdtl_report_free(report);
        wdtl_checkpoint_free(best);
    }
    if (!best_accs.empty()) {
        double mean = 0.0, ci = 0.0;
        check(wdtl_aggregate(best_accs.data(),
                             static_cast<int>(best_accs.size()), &mean, &ci));
        nlohmann::json j;
        j["accuracies"] = best_accs;
        j["mean"] = mean;
        j["ci_half_width"] = ci;
        j["ci_available"] = best_accs.size() >= 2;
        std::ofstream out(fs::path(out_dir) / "aggregate.json");
        out << j.dump(2) << "\n";
        std::cout << "mean " << mean << " +/- " << ci << " (" << best_accs.size()
                  << " runs)\n";
    }
    if (labeled) wdtl_dataset_free(labeled);
    wdtl_checkpoint_free(init);
    wdtl_dataset_free(target);
    wdtl_dataset_free(source);
    write_manifest(out_dir);
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path) {
    wdtl_checkpoint* ckpt = nullptr;
    wdtl_dataset* ds = nullptr;
    check(wdtl_checkpoint_load(ckpt_path.c_str(), &ckpt));
    check(wdtl_dataset_load(data_path.c_str(), &ds));
    double accuracy = 0.0;
    int64_t confusion[16];
    check(wdtl_evaluate(ckpt, ds, &accuracy, confusion));
    std::printf("accuracy: %.4f\n", accuracy);
    print_confusion(confusion);
    wdtl_dataset_free(ds);
    wdtl_checkpoint_free(ckpt);
    return 0;
}

int cmd_export(const std::string& ckpt_path, const std::string& data_path,
               const std::string& out_path) {
    wdtl_checkpoint* ckpt = nullptr;
    wdtl_dataset* ds = nullptr;
    check(wdtl_checkpoint_load(ckpt_path.c_str(), &ckpt));
    check(wdtl_dataset_load(data_path.c_str(), &ds));
    check(wdtl_export_features(ckpt, ds, out_path.c_str()));
    std::cout << "wrote " << out_path << "\n";
    wdtl_dataset_free(ds);
    wdtl_checkpoint_free(ckpt);
    return 0;
}

int cmd_report(const std::string& dir) {
    // Collect run_*/report.json grouped by their experiment directory.
    std::map<std::string, std::vector<double>> groups;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().filename() != "report.json")
            continue;
        std::ifstream in(entry.path());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception&) {
            std::cerr << "error: malformed json in " << entry.path() << "\n";
            return 2;
        }
        if (!j.contains("best_accuracy")) continue;
        const double acc = j["best_accuracy"].get<double>();
        if (acc < 0.0) continue;
        const fs::path run_dir = entry.path().parent_path();
        const fs::path experiment = run_dir.filename().string().rfind("run_", 0) == 0
                                        ? run_dir.parent_path()
                                        : run_dir;
        groups[fs::relative(experiment, dir).string()].push_back(acc);
    }
    if (groups.empty()) {
        std::cout << "no reports found under " << dir << "\n";
        return 0;
    }
    std::printf("%-40s %10s %14s %6s\n", "experiment", "mean", "95% CI", "runs");
    for (const auto& [name, accs] : groups) {
        double mean = 0.0, ci = 0.0;
        check(wdtl_aggregate(accs.data(), static_cast<int>(accs.size()), &mean, &ci));
        std::printf("%-40s %9.2f%% +/- %9.2f%% %6zu\n",
                    (name == "." ? dir : name).c_str(), 100.0 * mean, 100.0 * ci,
                    accs.size());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein-distance deep transfer learning for 1-D fault "
                 "classification"};
    app.require_subcommand(1);

    std::string config_path, source_path, target_path, init_path, labeled_path;
    std::string out_dir, ckpt_path, data_path, out_path, report_dir;
    std::string format = "binary";
    std::map<std::string, std::string> overrides;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--config", config_path, "config file");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--format", format, "binary|csv");
    std::string ov_tag, ov_shaft, ov_seed, ov_sigma, ov_atten;
    synth->add_option("--tag", ov_tag, "domain tag override");
    synth->add_option("--shaft-hz", ov_shaft, "shaft frequency override");
    synth->add_option("--seed", ov_seed, "seed override");
    synth->add_option("--noise-sigma", ov_sigma, "noise sigma override");
    synth->add_option("--attenuation", ov_atten, "sensor attenuation override");

    auto* pre = app.add_subcommand("pretrain", "Train the source-domain CNN");
    pre->add_option("--config", config_path, "config file");
    pre->add_option("--source", source_path, "labeled source dataset")->required();
    pre->add_option("--out", out_dir, "output directory")->required();

    auto* ad = app.add_subcommand("adapt", "Run Wasserstein domain adaptation");
    ad->add_option("--config", config_path, "config file");
    ad->add_option("--source", source_path, "labeled source dataset")->required();
    ad->add_option("--target", target_path, "target dataset")->required();
    ad->add_option("--init", init_path, "pretrained checkpoint")->required();
    ad->add_option("--out", out_dir, "output directory")->required();
    ad->add_option("--labeled-target", labeled_path,
                   "small labeled target dataset (supervised variant)");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    ev->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    ev->add_option("--data", data_path, "labeled dataset")->required();

    auto* ex = app.add_subcommand("export-features",
                                  "Export flattened extractor features as CSV");
    ex->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    ex->add_option("--data", data_path, "dataset")->required();
    ex->add_option("--out", out_path, "output CSV path")->required();

    auto* rep = app.add_subcommand("report", "Aggregate run reports (mean +/- CI)");
    rep->add_option("--dir", report_dir, "directory of completed runs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            if (!ov_tag.empty()) overrides["domain_tag"] = ov_tag;
            if (!ov_shaft.empty()) overrides["synth_shaft_hz"] = ov_shaft;
            if (!ov_seed.empty()) overrides["seed"] = ov_seed;
            if (!ov_sigma.empty()) overrides["synth_noise_sigma"] = ov_sigma;
            if (!ov_atten.empty()) overrides["synth_attenuation"] = ov_atten;
            if (format != "binary" && format != "csv") {
                std::cerr << "error: --format must be binary or csv\n";
                return 1;
            }
            return cmd_synth(config_path, out_dir, overrides, format);
        }
        if (*pre) return cmd_pretrain(config_path, source_path, out_dir);
        if (*ad)
            return cmd_adapt(config_path, source_path, target_path, init_path,
                             labeled_path, out_dir);
        if (*ev) return cmd_eval(ckpt_path, data_path);
        if (*ex) return cmd_export(ckpt_path, data_path, out_path);
        if (*rep) return cmd_report(report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
