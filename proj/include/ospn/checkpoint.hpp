#pragma once

#include <optional>
#include <string>

#include "ospn/evosearch.hpp"
#include "ospn/model.hpp"
#include "ospn/runconfig.hpp"
#include "ospn/trainer.hpp"

namespace ospn {

// Checkpoint file, format OSPN1:
//   "OSPN1\n"
//   u64 LE manifest length
//   JSON manifest (architecture, step counts, Adam scalars, RNG provenance,
//                  config echo, parameter table, payload checksum)
//   payload: per parameter in manifest order, value/m/v as LE 64-bit doubles
// Serialization is canonical, so save(load(f)) reproduces f byte for byte.
struct Checkpoint {
    SupernetModel model;
    RunConfig config;
    std::optional<SparsityConfig> extracted_config;
};

void save_checkpoint(const SupernetModel& model, const RunConfig& config, const std::string& path,
                     const std::optional<SparsityConfig>& extracted_config = {});
Checkpoint load_checkpoint(const std::string& path);

// Dense weights with the masks at `config` applied as zeros; Adam state and
// counters are kept so the extracted model rebuilds the identical masks.
SupernetModel extract_subnet(const SupernetModel& model, const SparsityConfig& config);

// Per-step training metrics:
// step,cap,config_1..4,loss_1..4,wall_ms,batch_equivalents
void write_metrics_csv(const std::vector<StepMetrics>& metrics, const std::string& path);

// Pareto front export, header "config,size_bytes,val_loss", rows sorted by
// (size, config).
void write_front_csv(const ParetoFront& front, const std::string& path);
std::vector<Candidate> read_front_csv(const std::string& path);

// Plot-ready points, header "size_bytes,val_loss", sorted by size.
void write_plot_csv(std::vector<Candidate> candidates, const std::string& path);

} // namespace ospn
