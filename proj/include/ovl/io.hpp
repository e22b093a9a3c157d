#pragma once

#include <string>
#include <vector>

#include "ovl/analysis.hpp"
#include "ovl/config.hpp"
#include "ovl/sim.hpp"
#include "ovl/spectral.hpp"

namespace ovl {

// Shortest decimal form that parses back to the same bits.
std::string format_double(double v);

// Trajectory-major rows under the header t,traj_id,x1,x2,x3,v1,v2,v3.
void write_ensemble_csv(const std::string& path, const Ensemble& ens);
// Rebuilds states and sample times; model/scheme metadata is not in the CSV
// and is left default (callers supply it from their config when needed).
Ensemble read_ensemble_csv(const std::string& path);

void write_ensemble_binary(const std::string& path, const Ensemble& ens);
Ensemble read_ensemble_binary(const std::string& path);

// Grid scan in row-major order under the header x1,x2,x3,value.
void write_density_csv(const std::string& path, const DensityResult& d);
DensityResult read_density_csv(const std::string& path);

void write_density_binary(const std::string& path, const DensityResult& d);
DensityResult read_density_binary(const std::string& path);

enum class FileKind { EnsembleCsv, EnsembleBinary, DensityCsv, DensityBinary };
// Decides by magic bytes (binary) or header line (CSV); IoError otherwise.
FileKind sniff_file_kind(const std::string& path);

Ensemble read_ensemble_any(const std::string& path);
DensityResult read_density_any(const std::string& path);

// One JSON object per line, keys sorted, numbers in round-trip form.
void write_report_jsonl(const std::string& path,
                        const std::vector<ComparisonReport>& reports);
std::string render_report_table(const std::vector<ComparisonReport>& reports);

void write_text_file(const std::string& path, const std::string& content);

// Everything needed to regenerate the run's outputs: tool version, canonical
// config (hash included), master seed, and the produced files with their
// content hashes. Deliberately carries no timestamps so reruns byte-match.
void write_manifest(const std::string& path, const ExperimentConfig& cfg,
                    const std::vector<std::string>& output_files);

}
