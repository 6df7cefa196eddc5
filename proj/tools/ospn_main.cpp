#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ospn/checkpoint.hpp"
#include "ospn/dataset.hpp"
#include "ospn/error.hpp"
#include "ospn/evosearch.hpp"
#include "ospn/runconfig.hpp"
#include "ospn/strings.hpp"
#include "ospn/trainer.hpp"

namespace {

using namespace ospn;

struct GenDataArgs {
    std::uint64_t seed = 1;
    std::size_t n = 8000;
    std::size_t dim = 16;
    std::size_t classes = 4;
    std::size_t teacher_width = 16;
    double noise = 0.05;
    std::string out;
};

struct TrainArgs {
    std::string config_path;
    std::string mode;
    double sparsity = -1.0;
    std::string teacher_path;
    std::string out;
    std::string metrics;
};

struct SearchArgs {
    std::string ckpt;
    std::size_t budget = 600;
    std::uint64_t seed = 1;
    std::string out;
};

struct ExtractArgs {
    std::string ckpt;
    std::string config;
    std::string out;
};

struct EvalArgs {
    std::string ckpt;
    std::string config;
    std::string data;
};

struct ExportPlotArgs {
    std::string front;
    std::string out;
};

int cmd_gen_data(const GenDataArgs& args) {
    SyntheticSpec spec;
    spec.seed = args.seed;
    spec.n = args.n;
    spec.dim = args.dim;
    spec.classes = args.classes;
    spec.teacher_width = args.teacher_width;
    spec.label_noise = args.noise;
    const SyntheticData data = gen_synthetic(spec);
    save_csv(data.train, args.out + ".train.csv");
    save_csv(data.val, args.out + ".val.csv");
    std::cout << "wrote " << data.train.size() << " train rows to " << args.out << ".train.csv and "
              << data.val.size() << " validation rows to " << args.out << ".val.csv\n";
    return 0;
}

int cmd_train(const TrainArgs& args) {
    RunConfig cfg = RunConfig::from_file(args.config_path);
    if (!args.mode.empty()) cfg.train.mode = parse_train_mode(args.mode);
    if (args.sparsity >= 0.0) cfg.train.uniform_sparsity = args.sparsity;

    std::optional<Checkpoint> teacher;
    if (cfg.train.mode == TrainMode::single_kd) {
        if (args.teacher_path.empty()) {
            throw UsageError("--teacher <checkpoint> is required for --mode single-kd");
        }
        teacher = load_checkpoint(args.teacher_path);
    }

    const auto [train_set, val_set] = cfg.load_data();
    SupernetModel model = SupernetModel::create(cfg.arch, AdamState{cfg.train.lr}, cfg.train.seed);
    const SearchSpace space = cfg.space();

    const TrainResult result =
        train(model, train_set, space, cfg.train, teacher ? &teacher->model : nullptr);

    save_checkpoint(model, cfg, args.out);
    const std::string metrics_path = args.metrics.empty() ? args.out + ".metrics.csv" : args.metrics;
    write_metrics_csv(result.metrics, metrics_path);

    const double final_loss =
        result.metrics.empty() ? 0.0 : result.metrics.back().total_loss;
    std::cout << "mode=" << train_mode_name(cfg.train.mode) << " steps=" << model.train_steps
              << " final_loss=" << format_double(final_loss)
              << " batch_equivalents=" << format_double(result.total_batch_equivalents) << '\n'
              << "checkpoint: " << args.out << "\nmetrics: " << metrics_path << '\n';
    return 0;
}

int cmd_search(const SearchArgs& args) {
    Checkpoint ckpt = load_checkpoint(args.ckpt);
    const auto [train_set, val_set] = ckpt.config.load_data();
    (void)train_set;

    SearchParams params = ckpt.config.search;
    params.seed = args.seed;
    const ParetoFront front =
        evolutionary_search(ckpt.model, ckpt.config.space(), val_set, args.budget, params);
    write_front_csv(front, args.out);
    std::cout << "evaluated " << front.evaluation_log.size() << " configs, front holds "
              << front.members.size() << " members: " << args.out << '\n';
    return 0;
}

int cmd_extract(const ExtractArgs& args) {
    Checkpoint ckpt = load_checkpoint(args.ckpt);
    const SparsityConfig config = SparsityConfig::parse(args.config);
    const SupernetModel sub = extract_subnet(ckpt.model, config);
    save_checkpoint(sub, ckpt.config, args.out, config);
    std::cout << "extracted " << config.str() << " to " << args.out << '\n';
    return 0;
}

int cmd_eval(const EvalArgs& args) {
    Checkpoint ckpt = load_checkpoint(args.ckpt);
    const SparsityConfig config = SparsityConfig::parse(args.config);
    const Dataset data =
        load_csv(args.data, static_cast<int>(ckpt.model.arch.num_classes), "validation");
    const double loss = evaluate(ckpt.model, config, data);
    const std::size_t bytes = model_size_bytes(config, ckpt.model.arch_sizes());
    std::cout << "val_loss=" << format_double(loss) << " size_bytes=" << bytes << '\n';
    return 0;
}

int cmd_export_plot(const ExportPlotArgs& args) {
    write_plot_csv(read_front_csv(args.front), args.out);
    std::cout << "wrote " << args.out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparsity-supernet training, Pareto search and sub-network extraction"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic classification dataset");
    gen->add_option("--seed", gen_args.seed, "RNG seed");
    gen->add_option("--n", gen_args.n, "total examples (split 90/10)");
    gen->add_option("--d", gen_args.dim, "feature dimension");
    gen->add_option("--classes", gen_args.classes, "number of classes");
    gen->add_option("--teacher-width", gen_args.teacher_width, "hidden width of the labeling MLP");
    gen->add_option("--noise", gen_args.noise, "label flip probability");
    gen->add_option("--out", gen_args.out, "output stem (<out>.train.csv, <out>.val.csv)")->required();

    TrainArgs train_args;
    CLI::App* tr = app.add_subcommand("train", "Train a supernet or baseline");
    tr->add_option("--config", train_args.config_path, "key=value run config")->required();
    tr->add_option("--mode", train_args.mode, "supernet|single-nokd|single-kd|dsnn");
    tr->add_option("--sparsity", train_args.sparsity, "uniform sparsity for single modes");
    tr->add_option("--teacher", train_args.teacher_path, "dense teacher checkpoint (single-kd)");
    tr->add_option("--out", train_args.out, "output checkpoint")->required();
    tr->add_option("--metrics", train_args.metrics, "metrics CSV (default <out>.metrics.csv)");

    SearchArgs search_args;
    CLI::App* se = app.add_subcommand("search", "Evolutionary Pareto search over a trained supernet");
    se->add_option("--ckpt", search_args.ckpt, "supernet checkpoint")->required();
    se->add_option("--budget", search_args.budget, "evaluation budget");
    se->add_option("--seed", search_args.seed, "search seed");
    se->add_option("--out", search_args.out, "front CSV")->required();

    ExtractArgs extract_args;
    CLI::App* ex = app.add_subcommand("extract", "Materialize a masked sub-network checkpoint");
    ex->add_option("--ckpt", extract_args.ckpt, "supernet checkpoint")->required();
    ex->add_option("--config", extract_args.config, "sparsity config, e.g. \"0.5;0.8\"")->required();
    ex->add_option("--out", extract_args.out, "output checkpoint")->required();

    EvalArgs eval_args;
    CLI::App* ev = app.add_subcommand("eval", "Validation loss and size of a sub-network");
    ev->add_option("--ckpt", eval_args.ckpt, "checkpoint")->required();
    ev->add_option("--config", eval_args.config, "sparsity config")->required();
    ev->add_option("--data", eval_args.data, "dataset CSV")->required();

    ExportPlotArgs plot_args;
    CLI::App* pl = app.add_subcommand("export-plot", "Loss-vs-size points from a front CSV");
    pl->add_option("--front", plot_args.front, "front CSV")->required();
    pl->add_option("--out", plot_args.out, "points CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_args);
        if (tr->parsed()) return cmd_train(train_args);
        if (se->parsed()) return cmd_search(search_args);
        if (ex->parsed()) return cmd_extract(extract_args);
        if (ev->parsed()) return cmd_eval(eval_args);
        if (pl->parsed()) return cmd_export_plot(plot_args);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
