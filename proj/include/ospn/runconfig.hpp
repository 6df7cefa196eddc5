#pragma once

#include <map>
#include <string>
#include <vector>

#include "ospn/dataset.hpp"
#include "ospn/evosearch.hpp"
#include "ospn/model.hpp"
#include "ospn/trainer.hpp"

namespace ospn {

// Everything one run needs, loadable from a flat key=value file. Unset keys
// take the defaults below; unknown keys are parse errors.
struct RunConfig {
    ModelArch arch;
    std::vector<double> space_ratios{0.0, 0.5, 0.6, 0.7, 0.8};
    TrainConfig train;
    // Synthetic data parameters; ignored when CSV paths are given.
    std::uint64_t data_seed = 7;
    std::size_t data_n = 8000;
    double data_noise = 0.05;
    std::size_t teacher_width = 16;
    std::string train_csv;
    std::string val_csv;
    SearchParams search;
    std::string out_dir;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_lines(const std::vector<std::string>& lines, const std::string& origin);

    // Sets one key; throws ParseError on unknown keys or bad values.
    void apply(const std::string& key, const std::string& value);

    // Canonical flat form; from_echo(echo()) is the identity.
    std::map<std::string, std::string> echo() const;
    static RunConfig from_echo(const std::map<std::string, std::string>& kv);

    void validate() const;
    SearchSpace space() const;
    SyntheticSpec synthetic_spec() const;

    // Train/validation pair: CSVs when configured, synthetic otherwise.
    std::pair<Dataset, Dataset> load_data() const;
};

} // namespace ospn
