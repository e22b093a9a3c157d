#include "ovl/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ovl/errors.hpp"
#include "ovl/version.hpp"

namespace ovl {

using nlohmann::json;

namespace {

constexpr char kEnsembleMagic[8] = {'O', 'V', 'L', 'E', 'N', 'S', '1', '\0'};
constexpr char kDensityMagic[8] = {'O', 'V', 'L', 'G', 'R', 'D', '1', '\0'};
constexpr uint32_t kEndianTag = 0x01020304u;
constexpr char kEnsembleHeader[] = "t,traj_id,x1,x2,x3,v1,v2,v3";
constexpr char kDensityHeader[] = "x1,x2,x3,value";

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated file: " + path);
  return v;
}

double parse_double(const std::string& s, const std::string& path) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw IoError(path + ": malformed number '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

json report_to_json(const ComparisonReport& r) {
  json j;
  j["experiment_id"] = r.experiment_id;
  j["metric"] = r.metric;
  j["value"] = r.value;
  j["threshold"] = r.threshold;
  j["pass"] = r.pass;
  j["metadata"] = r.metadata;
  return j;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_ensemble_csv(const std::string& path, const Ensemble& ens) {
  auto out = open_out(path, false);
  out << kEnsembleHeader << "\n";
  for (size_t k = 0; k < ens.n_traj; ++k)
    for (size_t ti = 0; ti < ens.n_times(); ++ti) {
      const State& s = ens.at(k, ti);
      out << format_double(s.t) << ',' << k << ',' << format_double(s.x.x1)
          << ',' << format_double(s.x.x2) << ',' << format_double(s.x.x3)
          << ',' << format_double(s.v.x1) << ',' << format_double(s.v.x2)
          << ',' << format_double(s.v.x3) << '\n';
    }
  if (!out) throw IoError("write failed: " + path);
}

Ensemble read_ensemble_csv(const std::string& path) {
  auto in = open_in(path, false);
  std::string line;
  if (!std::getline(in, line) || line != kEnsembleHeader)
    throw IoError(path + ": missing ensemble CSV header");
  Ensemble ens;
  size_t row = 1;
  uint64_t current_traj = 0;
  bool first_traj_done = false;
  size_t ti_in_traj = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_row(line);
    const std::string where = path + ":" + std::to_string(row);
    if (cells.size() != 8) throw IoError(where + ": expected 8 columns");
    const double t = parse_double(cells[0], where);
    uint64_t traj = 0;
    {
      const auto res =
          std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), traj);
      if (res.ec != std::errc{} || res.ptr != cells[1].data() + cells[1].size())
        throw IoError(where + ": malformed traj_id");
    }
    if (traj != current_traj) {
      if (traj != current_traj + 1 || ti_in_traj == 0)
        throw IoError(where + ": trajectory ids must be contiguous, rows trajectory-major");
      if (!first_traj_done) first_traj_done = true;
      if (ti_in_traj != ens.sample_times.size())
        throw IoError(where + ": trajectory " + std::to_string(current_traj) +
                      " has wrong row count");
      current_traj = traj;
      ti_in_traj = 0;
    }
    if (!first_traj_done) {
      ens.sample_times.push_back(t);
    } else if (std::abs(t - ens.sample_times[ti_in_traj]) > 1e-9) {
      throw IoError(where + ": sample time mismatch across trajectories");
    }
    State s;
    s.t = t;
    s.x = {parse_double(cells[2], where), parse_double(cells[3], where),
           parse_double(cells[4], where)};
    s.v = {parse_double(cells[5], where), parse_double(cells[6], where),
           parse_double(cells[7], where)};
    ens.states.push_back(s);
    ++ti_in_traj;
  }
  if (ens.states.empty()) throw IoError(path + ": no data rows");
  if (ti_in_traj != ens.sample_times.size())
    throw IoError(path + ": last trajectory has wrong row count");
  ens.n_traj = current_traj + 1;
  return ens;
}

void write_ensemble_binary(const std::string& path, const Ensemble& ens) {
  auto out = open_out(path, true);
  out.write(kEnsembleMagic, 8);
  put<uint32_t>(out, 1);
  put<uint32_t>(out, kEndianTag);
  put<uint64_t>(out, ens.n_traj);
  put<uint64_t>(out, ens.n_times());
  put<double>(out, ens.scheme.dt);
  put<uint8_t>(out, ens.scheme.kind == SchemeKind::EulerMaruyama ? 0 : 1);
  put<uint64_t>(out, ens.master_seed);
  for (double t : ens.sample_times) put<double>(out, t);
  for (const State& s : ens.states) {
    put<double>(out, s.x.x1);
    put<double>(out, s.x.x2);
    put<double>(out, s.x.x3);
    put<double>(out, s.v.x1);
    put<double>(out, s.v.x2);
    put<double>(out, s.v.x3);
  }
  if (!out) throw IoError("write failed: " + path);
}

Ensemble read_ensemble_binary(const std::string& path) {
  auto in = open_in(path, true);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kEnsembleMagic, 8) != 0)
    throw IoError(path + ": not an ensemble binary file");
  if (take<uint32_t>(in, path) != 1) throw IoError(path + ": unsupported version");
  if (take<uint32_t>(in, path) != kEndianTag)
    throw IoError(path + ": endianness mismatch");
  Ensemble ens;
  ens.n_traj = take<uint64_t>(in, path);
  const uint64_t n_times = take<uint64_t>(in, path);
  ens.scheme.dt = take<double>(in, path);
  ens.scheme.kind =
      take<uint8_t>(in, path) == 0 ? SchemeKind::EulerMaruyama : SchemeKind::SpeedProjected;
  ens.master_seed = take<uint64_t>(in, path);
  if (ens.n_traj == 0 || n_times == 0) throw IoError(path + ": empty ensemble");
  if (ens.n_traj > (1ull << 40) || n_times > (1ull << 32))
    throw IoError(path + ": implausible header sizes");
  ens.sample_times.resize(n_times);
  for (auto& t : ens.sample_times) t = take<double>(in, path);
  ens.states.resize(ens.n_traj * n_times);
  for (uint64_t k = 0; k < ens.n_traj; ++k)
    for (uint64_t ti = 0; ti < n_times; ++ti) {
      State& s = ens.states[k * n_times + ti];
      s.t = ens.sample_times[ti];
      s.x.x1 = take<double>(in, path);
      s.x.x2 = take<double>(in, path);
      s.x.x3 = take<double>(in, path);
      s.v.x1 = take<double>(in, path);
      s.v.x2 = take<double>(in, path);
      s.v.x3 = take<double>(in, path);
    }
  return ens;
}

void write_density_csv(const std::string& path, const DensityResult& d) {
  auto out = open_out(path, false);
  out << kDensityHeader << "\n";
  const int n = d.grid.n_per_axis;
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2)
      for (int i3 = 0; i3 < n; ++i3)
        out << format_double(d.grid.x(i1)) << ',' << format_double(d.grid.x(i2))
            << ',' << format_double(d.grid.x(i3)) << ','
            << format_double(d.values[d.grid.index(i1, i2, i3)]) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

DensityResult read_density_csv(const std::string& path) {
  auto in = open_in(path, false);
  std::string line;
  if (!std::getline(in, line) || line != kDensityHeader)
    throw IoError(path + ": missing density CSV header");
  std::vector<double> x1s, values;
  std::vector<Vec3> coords;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_row(line);
    const std::string where = path + ":" + std::to_string(row);
    if (cells.size() != 4) throw IoError(where + ": expected 4 columns");
    coords.push_back(Vec3{parse_double(cells[0], where), parse_double(cells[1], where),
                          parse_double(cells[2], where)});
    values.push_back(parse_double(cells[3], where));
  }
  const size_t total = values.size();
  const int n = static_cast<int>(std::llround(std::cbrt(static_cast<double>(total))));
  if (total == 0 || static_cast<size_t>(n) * n * n != total)
    throw IoError(path + ": row count is not a cubic grid");
  DensityResult d;
  d.grid.n_per_axis = n;
  // Recover the cell size from the first axis stride; the scan is row-major,
  // so consecutive rows step x3 by dx.
  const double dx = coords[1].x3 - coords[0].x3;
  if (!(dx > 0.0)) throw IoError(path + ": grid coordinates not increasing");
  d.grid.x_extent = dx * n;
  d.grid.lambda_max = M_PI * n / d.grid.x_extent;
  d.grid.validate();
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2)
      for (int i3 = 0; i3 < n; ++i3) {
        const size_t idx = d.grid.index(i1, i2, i3);
        const Vec3 expect{d.grid.x(i1), d.grid.x(i2), d.grid.x(i3)};
        if (norm(coords[idx] - expect) > 1e-9 * std::max(1.0, d.grid.x_extent))
          throw IoError(path + ": grid coordinates are not a centered row-major scan");
      }
  d.values = std::move(values);
  double mass = 0.0;
  for (double v : d.values) mass += v;
  d.mass = mass * dx * dx * dx;
  return d;
}

void write_density_binary(const std::string& path, const DensityResult& d) {
  auto out = open_out(path, true);
  out.write(kDensityMagic, 8);
  put<uint32_t>(out, 1);
  put<uint32_t>(out, kEndianTag);
  put<uint32_t>(out, static_cast<uint32_t>(d.grid.n_per_axis));
  put<double>(out, d.grid.lambda_max);
  put<double>(out, d.grid.x_extent);
  put<double>(out, d.t);
  put<double>(out, d.mass);
  put<double>(out, d.clipped_mass);
  put<double>(out, d.imag_residue_rel);
  for (double v : d.values) put<double>(out, v);
  if (!out) throw IoError("write failed: " + path);
}

DensityResult read_density_binary(const std::string& path) {
  auto in = open_in(path, true);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kDensityMagic, 8) != 0)
    throw IoError(path + ": not a density binary file");
  if (take<uint32_t>(in, path) != 1) throw IoError(path + ": unsupported version");
  if (take<uint32_t>(in, path) != kEndianTag)
    throw IoError(path + ": endianness mismatch");
  DensityResult d;
  d.grid.n_per_axis = static_cast<int>(take<uint32_t>(in, path));
  d.grid.lambda_max = take<double>(in, path);
  d.grid.x_extent = take<double>(in, path);
  d.t = take<double>(in, path);
  d.mass = take<double>(in, path);
  d.clipped_mass = take<double>(in, path);
  d.imag_residue_rel = take<double>(in, path);
  d.grid.validate();
  d.values.resize(d.grid.size());
  for (auto& v : d.values) v = take<double>(in, path);
  return d;
}

FileKind sniff_file_kind(const std::string& path) {
  auto in = open_in(path, true);
  char head[8] = {};
  in.read(head, 8);
  const auto got = in.gcount();
  if (got == 8 && std::memcmp(head, kEnsembleMagic, 8) == 0)
    return FileKind::EnsembleBinary;
  if (got == 8 && std::memcmp(head, kDensityMagic, 8) == 0)
    return FileKind::DensityBinary;
  in.clear();
  in.seekg(0);
  std::string line;
  if (std::getline(in, line)) {
    if (line == kEnsembleHeader) return FileKind::EnsembleCsv;
    if (line == kDensityHeader) return FileKind::DensityCsv;
  }
  throw IoError(path + ": unrecognized file format");
}

Ensemble read_ensemble_any(const std::string& path) {
  switch (sniff_file_kind(path)) {
    case FileKind::EnsembleBinary: return read_ensemble_binary(path);
    case FileKind::EnsembleCsv: return read_ensemble_csv(path);
    default: throw IoError(path + ": expected an ensemble file");
  }
}

DensityResult read_density_any(const std::string& path) {
  switch (sniff_file_kind(path)) {
    case FileKind::DensityBinary: return read_density_binary(path);
    case FileKind::DensityCsv: return read_density_csv(path);
    default: throw IoError(path + ": expected a density file");
  }
}

void write_report_jsonl(const std::string& path,
                        const std::vector<ComparisonReport>& reports) {
  auto out = open_out(path, false);
  for (const auto& r : reports) out << report_to_json(r).dump() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::string render_report_table(const std::vector<ComparisonReport>& reports) {
  size_t w_exp = 10, w_metric = 6;
  for (const auto& r : reports) {
    w_exp = std::max(w_exp, r.experiment_id.size());
    w_metric = std::max(w_metric, r.metric.size());
  }
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%12.6g", v);
    return std::string(buf);
  };
  out << std::string(w_exp, ' ') << "  " << std::string(w_metric, ' ')
      << "         value     threshold  verdict\n";
  for (const auto& r : reports) {
    out << r.experiment_id << std::string(w_exp - r.experiment_id.size(), ' ')
        << "  " << r.metric << std::string(w_metric - r.metric.size(), ' ')
        << "  " << num(r.value) << "  " << num(r.threshold) << "  "
        << (r.pass ? "pass" : "FAIL") << "\n";
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  auto out = open_out(path, false);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

void write_manifest(const std::string& path, const ExperimentConfig& cfg,
                    const std::vector<std::string>& output_files) {
  json m;
  m["tool_version"] = tool_version;
  m["config_hash"] = config_hash_hex(cfg);
  m["master_seed"] = cfg.master_seed;
  m["config"] = json::parse(canonical_config_dump(cfg));
  json outs = json::array();
  for (const auto& f : output_files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw IoError("manifest: cannot hash missing output " + f);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    const uint64_t h = fnv1a64(bytes);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    outs.push_back({{"file", std::filesystem::path(f).filename().string()},
                    {"bytes", bytes.size()},
                    {"fnv1a64", hex}});
  }
  m["outputs"] = outs;
  write_text_file(path, m.dump(2) + "\n");
}

}
