// mamr: multi-antenna modulation recognition lab
//
// Subcommands: gen (synthesize a labeled dataset), augment (exchange/flip
// expansion), train (fit a classifier), eval / fuse (score a recognition
// strategy), complexity (inference cost accounting).
//
// Exit codes: 0 success, 2 usage error, 1 runtime error. Data goes to
// files; diagnostics go to stderr. Every command writes a JSON manifest
// next to its outputs with the resolved configuration and seeds.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mamr/augment.hpp"
#include "mamr/complexity.hpp"
#include "mamr/datagen.hpp"
#include "mamr/nn/checkpoint.hpp"
#include "mamr/nn/train.hpp"
#include "mamr/pipeline.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

void write_manifest(const fs::path& path, const std::string& command, const json& config,
                    const json& inputs, const json& outputs, double wall_seconds) {
    json m = {
        {"command", command},
        {"config", config},
        {"inputs", inputs},
        {"outputs", outputs},
        {"tool_version", mamr::datagen::kGeneratorVersion},
        {"wall_seconds", wall_seconds},
    };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
    out << m.dump(2) << "\n";
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string mods;
    double snr_min = -20.0, snr_max = 30.0, snr_step = 2.0;
    int per_class = 500;
    int antennas = 4;
    int length = 512;
    std::string setting = "fixed";
    std::string phases;
    std::string offset_ref = "fs";
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out;
};

int cmd_gen(const GenArgs& a) {
    Stopwatch timer;
    mamr::datagen::DatasetSpec spec;
    if (!a.mods.empty()) {
        spec.mods.clear();
        for (const auto& name : split_csv(a.mods))
            spec.mods.push_back(mamr::modem::modulation_from_string(name));
    }
    spec.snr_min_db = a.snr_min;
    spec.snr_max_db = a.snr_max;
    spec.snr_step_db = a.snr_step;
    spec.per_class_per_snr = a.per_class;
    spec.master_seed = a.seed;
    spec.channel.antennas = a.antennas;
    if (a.setting == "fixed")
        spec.channel.setting = mamr::channel::AntennaSetting::Fixed;
    else if (a.setting == "random")
        spec.channel.setting = mamr::channel::AntennaSetting::Random;
    else
        throw UsageError("--antenna-setting must be fixed or random");
    if (!a.phases.empty()) {
        for (const auto& tok : split_csv(a.phases))
            spec.channel.fixed_phases.push_back(std::stod(tok));
    }
    spec.modem.signal_length = a.length;
    if (a.offset_ref == "fs")
        spec.modem.offset_ref = mamr::modem::OffsetReference::SampleRate;
    else if (a.offset_ref == "symbol")
        spec.modem.offset_ref = mamr::modem::OffsetReference::SymbolRate;
    else
        throw UsageError("--offset-ref must be fs or symbol");

    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }

    const auto dataset = mamr::datagen::generate(spec, a.threads);
    mamr::datagen::write_dataset(dataset, a.out);
    std::cerr << "wrote " << dataset.samples.size() << " samples to " << a.out << "\n";

    write_manifest(a.out + ".manifest.json", "gen", spec.to_json(), json::array(),
                   json::array({a.out, mamr::datagen::sidecar_path(a.out)}), timer.seconds());
    return 0;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
    std::string in, out;
    int exchanges = 0;
    std::string flip = "none";
    std::uint64_t seed = 1;
};

int cmd_augment(const AugmentArgs& a) {
    Stopwatch timer;
    const auto input = mamr::datagen::read_dataset(a.in);
    const int d_max = mamr::augment::max_exchanges(input.antennas);
    if (a.exchanges < 0 || a.exchanges > d_max)
        throw UsageError("--exchanges " + std::to_string(a.exchanges) + " out of range: max " +
                         std::to_string(d_max) + " for " + std::to_string(input.antennas) +
                         " antennas");
    mamr::augment::FlipPolicy flip;
    try {
        flip = mamr::augment::flip_policy_from_string(a.flip);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }

    const auto expanded = mamr::augment::compose(input, a.exchanges, flip, a.seed);
    mamr::datagen::write_dataset(expanded, a.out);
    std::cerr << "expanded " << input.samples.size() << " -> " << expanded.samples.size()
              << " samples\n";

    const json config = {{"exchanges", a.exchanges}, {"flip", a.flip}, {"seed", a.seed}};
    write_manifest(a.out + ".manifest.json", "augment", config, json::array({a.in}),
                   json::array({a.out, mamr::datagen::sidecar_path(a.out)}), timer.seconds());
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string arch = "resnet56";
    int epochs = 20;
    int batch = 128;
    double lr = 0.01;
    std::string decay_epochs = "10,15";
    std::uint64_t seed = 1;
    std::string data, val, model_out;
};

int cmd_train(const TrainArgs& a) {
    Stopwatch timer;
    const auto train_set = mamr::datagen::read_dataset(a.data);
    if (train_set.samples.empty()) throw UsageError("training set is empty");
    mamr::datagen::Dataset val_set;
    if (!a.val.empty()) val_set = mamr::datagen::read_dataset(a.val);

    mamr::nn::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch = a.batch;
    cfg.lr = a.lr;
    cfg.seed = a.seed;
    cfg.decay_epochs.clear();
    for (const auto& tok : split_csv(a.decay_epochs)) cfg.decay_epochs.push_back(std::stoi(tok));
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }

    const auto labels = mamr::nn::LabelMap::from_dataset(train_set);
    const auto spec = mamr::nn::build_network(mamr::nn::arch_from_string(a.arch),
                                              train_set.antennas,
                                              static_cast<int>(train_set.length), labels.size());
    mamr::nn::Network<float> net(spec, a.seed);
    const auto history = mamr::nn::train(net, train_set, val_set, cfg, labels);

    mamr::nn::save_checkpoint(net, labels.classes, a.model_out);
    const std::string history_path = a.model_out + ".history.csv";
    history.write_csv(history_path);
    if (!history.epochs.empty())
        std::cerr << "final train loss " << history.epochs.back().train_loss << ", val acc "
                  << history.epochs.back().val_acc << "\n";

    const json config = {{"arch", a.arch},     {"epochs", a.epochs},
                         {"batch", a.batch},   {"lr", a.lr},
                         {"decay_epochs", a.decay_epochs}, {"seed", a.seed}};
    write_manifest(a.model_out + ".manifest.json", "train", config,
                   json::array({a.data, a.val}), json::array({a.model_out, history_path}),
                   timer.seconds());
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string mode;
    std::string model, data, report_dir;
};

int cmd_eval(const EvalArgs& a, const std::string& command) {
    Stopwatch timer;
    const auto mode = mamr::pipeline::fusion_from_string(a.mode);
    auto ck = mamr::nn::load_checkpoint(a.model);
    const auto test = mamr::datagen::read_dataset(a.data);
    const mamr::nn::LabelMap labels{ck.class_labels};

    const auto report = mamr::pipeline::evaluate(mode, *ck.net, test, labels);

    fs::create_directories(a.report_dir);
    const fs::path dir(a.report_dir);
    std::map<std::string, mamr::pipeline::EvalReport> reports{{a.mode, report}};
    mamr::pipeline::write_accuracy_by_snr_csv(reports, (dir / "accuracy_by_snr.csv").string());
    mamr::pipeline::write_confusion_csv(report, (dir / ("confusion_" + a.mode + ".csv")).string());
    json summary = {{"mode", a.mode},
                    {"overall_accuracy", report.overall},
                    {"test_samples", report.total},
                    {"model", a.model},
                    {"data", a.data}};
    std::ofstream out(dir / "summary.json");
    out << summary.dump(2) << "\n";
    std::cerr << a.mode << " accuracy: " << report.overall << "\n";

    const json config = {{"mode", a.mode}, {"model", a.model}, {"data", a.data}};
    write_manifest(dir / "manifest.json", command, config, json::array({a.model, a.data}),
                   json::array({(dir / "accuracy_by_snr.csv").string(),
                                (dir / ("confusion_" + a.mode + ".csv")).string(),
                                (dir / "summary.json").string()}),
                   timer.seconds());
    return 0;
}

// ---------------------------------------------------------------------------

struct ComplexityArgs {
    int antennas = 4;
    double feature_size = 512.0;
    std::string method = "all";
    std::string out_dir = ".";
};

int cmd_complexity(const ComplexityArgs& a) {
    Stopwatch timer;
    namespace cx = mamr::complexity;
    std::vector<cx::Method> methods;
    if (a.method == "all")
        methods = {cx::Method::Single, cx::Method::DV, cx::Method::WA, cx::Method::IQ};
    else
        methods = {cx::method_from_string(a.method)};

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    {
        std::ofstream out(dir / "complexity.csv");
        out << "method,flops,params,feature_mem,space_total,"
               "t_con1,t_block1,t_block2,t_block3,w_con1,w_block1,w_block2,w_block3\n";
        for (cx::Method m : methods) {
            const auto r = cx::closed_form(m, a.antennas, a.feature_size);
            out << r.method << "," << r.flops << "," << r.conv_weights << "," << r.feature_mem
                << "," << r.space_total() << "," << r.t_con1 << "," << r.t_block1 << ","
                << r.t_block2 << "," << r.t_block3 << "," << r.w_con1 << "," << r.w_block1 << ","
                << r.w_block2 << "," << r.w_block3 << "\n";
        }
    }
    {
        const auto cmp = cx::table_vi_check();
        std::ofstream out(dir / "table_vi_comparison.txt");
        out << "Published inference complexity (4 antennas, millions):\n";
        for (const auto& e : cmp.published)
            out << "  " << e.method << ": FLOPs " << e.flops_m << "M, params " << e.params_m
                << "M\n";
        out << "\nClosed-form cross-checks:\n";
        out << "  dv/single flops ratio: published " << cmp.dv_over_single_published
            << ", predicted " << cmp.dv_over_single_predicted << "\n";
        out << "  iq/single flops ratio: published " << cmp.iq_over_single_published
            << ", predicted " << cmp.iq_over_single_predicted << "\n";
        out << "  single-net conv weights: published " << cmp.single_params_published
            << ", predicted " << cmp.single_params_predicted << "\n";
        out << "\nNotes:\n";
        for (const auto& n : cmp.notes) out << "  - " << n << "\n";
    }
    std::cerr << "wrote " << (dir / "complexity.csv").string() << "\n";

    const json config = {{"antennas", a.antennas},
                         {"feature_size", a.feature_size},
                         {"method", a.method}};
    write_manifest(dir / "complexity.manifest.json", "complexity", config, json::array(),
                   json::array({(dir / "complexity.csv").string(),
                                (dir / "table_vi_comparison.txt").string()}),
                   timer.seconds());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-antenna modulation recognition lab"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* sc_gen = app.add_subcommand("gen", "synthesize a labeled IQ dataset");
    sc_gen->add_option("--mods", gen.mods, "comma-separated modulation names (default: all 12)");
    sc_gen->add_option("--snr-min", gen.snr_min, "grid start, dB");
    sc_gen->add_option("--snr-max", gen.snr_max, "grid end, dB");
    sc_gen->add_option("--snr-step", gen.snr_step, "grid step, dB");
    sc_gen->add_option("--per-class", gen.per_class, "samples per (class, SNR) stratum");
    sc_gen->add_option("--antennas", gen.antennas, "receive antennas C");
    sc_gen->add_option("--length", gen.length, "samples per signal N");
    sc_gen->add_option("--antenna-setting", gen.setting, "fixed | random");
    sc_gen->add_option("--phases", gen.phases, "fixed phases, comma-separated radians");
    sc_gen->add_option("--offset-ref", gen.offset_ref,
                       "frequency offset reference: fs | symbol");
    sc_gen->add_option("--seed", gen.seed, "master seed");
    sc_gen->add_option("--threads", gen.threads, "worker threads (0 = auto)");
    sc_gen->add_option("--out", gen.out, "output dataset path")->required();

    AugmentArgs aug;
    auto* sc_aug = app.add_subcommand("augment", "antenna-exchange / IQ-flip expansion");
    sc_aug->add_option("--in", aug.in, "input dataset")->required();
    sc_aug->add_option("--out", aug.out, "output dataset")->required();
    sc_aug->add_option("--exchanges", aug.exchanges, "exchanges D per sample");
    sc_aug->add_option("--flip", aug.flip, "none | i | q | iq | all");
    sc_aug->add_option("--seed", aug.seed, "pair-selection seed");

    TrainArgs train;
    auto* sc_train = app.add_subcommand("train", "train a classifier");
    sc_train->add_option("--arch", train.arch, "resnet56 | cnn-small");
    sc_train->add_option("--epochs", train.epochs, "training epochs");
    sc_train->add_option("--batch", train.batch, "batch size");
    sc_train->add_option("--lr", train.lr, "initial learning rate");
    sc_train->add_option("--decay-epochs", train.decay_epochs, "x0.1 epochs, e.g. 10,15");
    sc_train->add_option("--seed", train.seed, "training seed");
    sc_train->add_option("--data", train.data, "training dataset")->required();
    sc_train->add_option("--val", train.val, "validation dataset");
    sc_train->add_option("--model-out", train.model_out, "checkpoint path")->required();

    EvalArgs eval;
    auto* sc_eval = app.add_subcommand("eval", "evaluate a recognition strategy");
    auto* sc_fuse = app.add_subcommand("fuse", "evaluate a fusion strategy (alias of eval)");
    for (auto* sc : {sc_eval, sc_fuse}) {
        sc->add_option("--mode", eval.mode, "single | dv | wa | iq")->required();
        sc->add_option("--model", eval.model, "model checkpoint")->required();
        sc->add_option("--data", eval.data, "test dataset")->required();
        sc->add_option("--report-dir", eval.report_dir, "report output directory")->required();
    }

    ComplexityArgs cx;
    auto* sc_cx = app.add_subcommand("complexity", "closed-form inference cost report");
    sc_cx->add_option("--antennas", cx.antennas, "receive antennas C");
    sc_cx->add_option("--feature-size", cx.feature_size, "feature map size F = F_l * F_w");
    sc_cx->add_option("--method", cx.method, "single | dv | wa | iq | all");
    sc_cx->add_option("--out-dir", cx.out_dir, "report output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (sc_gen->parsed()) return cmd_gen(gen);
        if (sc_aug->parsed()) return cmd_augment(aug);
        if (sc_train->parsed()) return cmd_train(train);
        if (sc_eval->parsed()) return cmd_eval(eval, "eval");
        if (sc_fuse->parsed()) return cmd_eval(eval, "fuse");
        if (sc_cx->parsed()) return cmd_complexity(cx);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
