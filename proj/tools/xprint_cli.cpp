// Command-line front end: generate synthetic corpora, train a model bundle,
// run inference, evaluate predictions, and reproduce the named experiments.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "xprint/evaluate.hpp"
#include "xprint/experiments.hpp"
#include "xprint/pipeline.hpp"
#include "xprint/traffic.hpp"

namespace {

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(1, '\t') << "\n";
}

nlohmann::ordered_json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    return nlohmann::ordered_json::parse(in);
}

xprint::PipelineConfig load_config(const std::string& path,
                                   std::optional<std::uint64_t> seed) {
    xprint::PipelineConfig config = xprint::PipelineConfig::load_file(path);
    if (seed) config.seed = *seed;
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"server-centric encrypted-traffic fingerprinting pipeline"};
    app.require_subcommand(1);

    std::string config_path, data_path, bundle_path, pred_path, truth_path, out_path;
    std::string experiment_name;
    std::optional<std::uint64_t> seed;

    CLI::App* generate = app.add_subcommand(
        "generate", "generate a synthetic train/test corpus from a scenario config");
    generate->add_option("--config", config_path, "pipeline config JSON")->required();
    generate->add_option("--seed", seed, "override the config seed");
    generate->add_option("--out", out_path, "output directory")->required();

    CLI::App* train_cmd =
        app.add_subcommand("train", "train all model families into a bundle");
    train_cmd->add_option("--config", config_path, "pipeline config JSON")->required();
    train_cmd->add_option("--seed", seed, "override the config seed");
    train_cmd->add_option("--data", data_path, "training traces (JSON lines)")->required();
    train_cmd->add_option("--out", out_path, "bundle output path")->required();

    CLI::App* infer_cmd =
        app.add_subcommand("infer", "run the full inference chain on traces");
    infer_cmd->add_option("--bundle", bundle_path, "trained bundle JSON")->required();
    infer_cmd->add_option("--data", data_path, "traces to label (JSON lines)")->required();
    infer_cmd->add_option("--out", out_path, "predictions output path")->required();

    CLI::App* eval_cmd =
        app.add_subcommand("evaluate", "score predictions against ground truth");
    eval_cmd->add_option("--pred", pred_path, "predictions JSON from `infer`")->required();
    eval_cmd->add_option("--truth", truth_path, "ground-truth traces (JSON lines)")
        ->required();
    eval_cmd->add_option("--bundle", bundle_path,
                         "bundle whose behaviors count as known (for unseen metrics)");
    eval_cmd->add_option("--out", out_path, "report output path")->required();

    CLI::App* exp_cmd = app.add_subcommand("experiment", "run a named experiment");
    std::string names_help = "one of:";
    for (const auto& name : xprint::experiment_names()) names_help += " " + name;
    exp_cmd->add_option("--name", experiment_name, names_help)->required();
    exp_cmd->add_option("--config", config_path, "pipeline config JSON")->required();
    exp_cmd->add_option("--seed", seed, "override the config seed");
    exp_cmd->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);

        if (app.got_subcommand(generate)) {
            const xprint::PipelineConfig config = load_config(config_path, seed);
            const xprint::GeneratedCorpus corpus = xprint::generate_corpus(config);
            std::filesystem::create_directories(out_path);
            xprint::save_traces_file(corpus.train, out_path + "/train.jsonl");
            xprint::save_traces_file(corpus.test, out_path + "/test.jsonl");
            write_json(out_path + "/manifest.json", corpus.manifest);
            std::cout << "wrote " << corpus.train.size() << " training and "
                      << corpus.test.size() << " test traces to " << out_path << "\n";
        } else if (app.got_subcommand(train_cmd)) {
            const xprint::PipelineConfig config = load_config(config_path, seed);
            const auto traces = xprint::load_traces_file(data_path);
            const xprint::ModelBundle bundle = xprint::train(config, traces);
            bundle.save_file(out_path);
            std::cout << "wrote bundle with " << bundle.similarity.size()
                      << " similarity models and " << bundle.cums.size() << " maps to "
                      << out_path << "\n";
        } else if (app.got_subcommand(infer_cmd)) {
            const xprint::ModelBundle bundle = xprint::ModelBundle::load_file(bundle_path);
            const auto traces = xprint::load_traces_file(data_path);
            nlohmann::ordered_json results = nlohmann::ordered_json::array();
            for (const auto& trace : traces) {
                results.push_back(xprint::infer(bundle, trace).to_json());
            }
            write_json(out_path, results);
            std::cout << "wrote predictions for " << traces.size() << " traces to "
                      << out_path << "\n";
        } else if (app.got_subcommand(eval_cmd)) {
            const nlohmann::ordered_json pred_json = read_json(pred_path);
            std::vector<xprint::TracePredictions> predictions;
            for (const auto& item : pred_json) {
                predictions.push_back(
                    xprint::to_predictions(xprint::InferenceResult::from_json(item)));
            }
            const auto truth = xprint::load_traces_file(truth_path);
            std::set<std::string> known;
            if (!bundle_path.empty()) {
                known = xprint::ModelBundle::load_file(bundle_path).known_behaviors();
            }
            const xprint::EvalReport report = xprint::evaluate(predictions, truth, known);
            write_json(out_path, report.to_json());
            std::cout << "behavior macro F1 " << report.macro_f1_behavior << ", report in "
                      << out_path << "\n";
        } else if (app.got_subcommand(exp_cmd)) {
            const xprint::PipelineConfig config = load_config(config_path, seed);
            xprint::run_experiment(experiment_name, config, out_path);
            std::cout << "experiment " << experiment_name << " done, artifacts in "
                      << out_path << "\n";
        }
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
