#include "ginit/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ginit/errors.hpp"
#include "ginit/random.hpp"

namespace ginit {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& field, std::size_t line) {
  double value = 0.0;
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw ParseError(line, "not a number: '" + field + "'");
  }
  if (!std::isfinite(value)) {
    throw ParseError(line, "non-finite field: '" + field + "'");
  }
  return value;
}

std::int64_t parse_int64(const std::string& field, std::size_t line) {
  std::int64_t value = 0;
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw ParseError(line, "not an integer timestamp: '" + field + "'");
  }
  return value;
}

// seconds from the shared origin; captures the origin from the first row.
double to_relative_seconds(const std::string& field, TimeUnit unit,
                           TimeOrigin* origin, std::size_t line) {
  if (unit == TimeUnit::Nanoseconds) {
    const std::int64_t t = parse_int64(field, line);
    if (!origin->set) {
      origin->set = true;
      origin->ns = t;
    }
    return static_cast<double>(t - origin->ns) * 1e-9;
  }
  const double t = parse_double(field, line);
  if (!origin->set) {
    origin->set = true;
    origin->sec = t;
  }
  return t - origin->sec;
}

// Runs fn(fields, line_number) on each data row. The first non-comment line
// that fails numeric parsing is treated as the header.
template <typename Fn>
void for_each_row(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in.is_open()) {
    throw IoError("cannot open " + path);
  }
  std::string line;
  std::size_t line_no = 0;
  bool saw_data = false;
  bool header_allowance = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (header_allowance) {
      header_allowance = false;
      double probe;
      const auto res = std::from_chars(
          fields[0].data(), fields[0].data() + fields[0].size(), probe);
      if (res.ec != std::errc{}) continue;  // header line
    }
    fn(fields, line_no);
    saw_data = true;
  }
  if (!saw_data) {
    throw ParseError(line_no, "no data rows in " + path);
  }
}

void check_monotonic(double t, double prev, bool first) {
  if (!first && !(t > prev)) {
    throw NonMonotonicTimestamps("timestamps must be strictly increasing");
  }
}

void require_fields(const std::vector<std::string>& fields, std::size_t needed,
                    std::size_t line) {
  if (fields.size() < needed) {
    throw ParseError(line, "expected at least " + std::to_string(needed) +
                               " fields, got " + std::to_string(fields.size()));
  }
}

}  // namespace

std::vector<ImuSample> load_imu(const std::string& path, TimeUnit unit,
                                TimeOrigin* origin) {
  TimeOrigin local;
  TimeOrigin* org = origin ? origin : &local;
  std::vector<ImuSample> out;
  for_each_row(path, [&](const std::vector<std::string>& f, std::size_t line) {
    require_fields(f, 7, line);
    ImuSample s;
    s.timestamp = to_relative_seconds(f[0], unit, org, line);
    for (int a = 0; a < 3; ++a) s.gyro(a) = parse_double(f[1 + a], line);
    for (int a = 0; a < 3; ++a) s.accel(a) = parse_double(f[4 + a], line);
    check_monotonic(s.timestamp, out.empty() ? 0 : out.back().timestamp,
                    out.empty());
    out.push_back(s);
  });
  return out;
}

std::vector<GroundTruthSample> load_groundtruth(const std::string& path,
                                                TimeUnit unit,
                                                TimeOrigin* origin) {
  TimeOrigin local;
  TimeOrigin* org = origin ? origin : &local;
  std::vector<GroundTruthSample> out;
  for_each_row(path, [&](const std::vector<std::string>& f, std::size_t line) {
    require_fields(f, 8, line);
    GroundTruthSample s;
    s.timestamp = to_relative_seconds(f[0], unit, org, line);
    for (int a = 0; a < 3; ++a) s.position(a) = parse_double(f[1 + a], line);
    Eigen::Quaterniond q(parse_double(f[4], line), parse_double(f[5], line),
                         parse_double(f[6], line), parse_double(f[7], line));
    if (q.norm() < 1e-9) throw ParseError(line, "zero quaternion");
    s.rotation = q.normalized().toRotationMatrix();
    if (f.size() >= 11) {
      for (int a = 0; a < 3; ++a) s.velocity(a) = parse_double(f[8 + a], line);
      s.has_velocity = true;
    }
    check_monotonic(s.timestamp, out.empty() ? 0 : out.back().timestamp,
                    out.empty());
    out.push_back(s);
  });
  return out;
}

std::vector<GnssMeasurement> load_gnss(const std::string& path, TimeUnit unit,
                                       TimeOrigin* origin) {
  TimeOrigin local;
  TimeOrigin* org = origin ? origin : &local;
  std::vector<GnssMeasurement> out;
  for_each_row(path, [&](const std::vector<std::string>& f, std::size_t line) {
    require_fields(f, 7, line);
    GnssMeasurement s;
    s.timestamp = to_relative_seconds(f[0], unit, org, line);
    for (int a = 0; a < 3; ++a) s.position(a) = parse_double(f[1 + a], line);
    s.cov = Mat3::Zero();
    for (int a = 0; a < 3; ++a) s.cov(a, a) = parse_double(f[4 + a], line);
    check_monotonic(s.timestamp, out.empty() ? 0 : out.back().timestamp,
                    out.empty());
    out.push_back(s);
  });
  return out;
}

LoadedDataset load_dataset(const DatasetManifest& manifest) {
  if (manifest.imu_path.empty()) {
    throw IoError("manifest: imu_path is required");
  }
  const bool has_gnss = !manifest.gnss_path.empty();
  const bool has_gt = !manifest.groundtruth_path.empty();
  if (!has_gnss && !has_gt) {
    throw IoError("manifest: need either gnss_path or groundtruth_path");
  }

  LoadedDataset out;
  TimeOrigin origin;
  out.imu = load_imu(manifest.imu_path, manifest.time_unit, &origin);
  if (has_gt) {
    out.groundtruth =
        load_groundtruth(manifest.groundtruth_path, manifest.time_unit, &origin);
  }
  if (has_gnss) {
    out.gnss = load_gnss(manifest.gnss_path, manifest.time_unit, &origin);
  } else {
    out.gnss = synthesize_gnss(out.groundtruth, manifest.synth_sigma,
                               manifest.synth_rate, manifest.synth_seed);
  }
  return out;
}

std::vector<GnssMeasurement> synthesize_gnss(
    std::span<const GroundTruthSample> groundtruth, double sigma, double rate,
    std::uint64_t seed) {
  if (groundtruth.size() < 2) {
    throw LengthMismatch("synthesize_gnss: ground truth too short");
  }
  GaussianSampler noise(seed);
  const double t0 = groundtruth.front().timestamp;
  const double t_end = groundtruth.back().timestamp;
  const double sigma_eff = std::max(sigma, 1e-9);

  std::vector<GnssMeasurement> out;
  std::size_t cursor = 1;
  for (std::size_t j = 0;; ++j) {
    const double t = t0 + static_cast<double>(j) / rate;
    if (t > t_end) break;
    while (cursor + 1 < groundtruth.size() &&
           groundtruth[cursor].timestamp < t) {
      ++cursor;
    }
    const auto& a = groundtruth[cursor - 1];
    const auto& b = groundtruth[cursor];
    const double w = (t - a.timestamp) / (b.timestamp - a.timestamp);
    GnssMeasurement meas;
    meas.timestamp = t;
    meas.position = (1.0 - w) * a.position + w * b.position + noise.vec3(sigma);
    meas.cov = sigma_eff * sigma_eff * Mat3::Identity();
    out.push_back(meas);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out.is_open()) throw IoError("cannot write " + path);
  return out;
}

}  // namespace

void write_imu_csv(std::span<const ImuSample> samples, const std::string& path) {
  auto out = open_out(path);
  out << "timestamp,wx,wy,wz,ax,ay,az\n";
  for (const auto& s : samples) {
    out << fmt(s.timestamp);
    for (int a = 0; a < 3; ++a) out << ',' << fmt(s.gyro(a));
    for (int a = 0; a < 3; ++a) out << ',' << fmt(s.accel(a));
    out << '\n';
  }
}

void write_groundtruth_csv(std::span<const GroundTruthSample> samples,
                           const std::string& path) {
  auto out = open_out(path);
  out << "timestamp,px,py,pz,qw,qx,qy,qz,vx,vy,vz\n";
  for (const auto& s : samples) {
    const Eigen::Quaterniond q(s.rotation);
    out << fmt(s.timestamp);
    for (int a = 0; a < 3; ++a) out << ',' << fmt(s.position(a));
    out << ',' << fmt(q.w()) << ',' << fmt(q.x()) << ',' << fmt(q.y()) << ','
        << fmt(q.z());
    for (int a = 0; a < 3; ++a) out << ',' << fmt(s.velocity(a));
    out << '\n';
  }
}

void write_gnss_csv(std::span<const GnssMeasurement> samples,
                    const std::string& path) {
  auto out = open_out(path);
  out << "timestamp,px,py,pz,sxx,syy,szz\n";
  for (const auto& s : samples) {
    out << fmt(s.timestamp);
    for (int a = 0; a < 3; ++a) out << ',' << fmt(s.position(a));
    for (int a = 0; a < 3; ++a) out << ',' << fmt(s.cov(a, a));
    out << '\n';
  }
}

void write_report(std::span<const RunRecord> records, const std::string& stem) {
  {
    auto out = open_out(stem + ".csv");
    out << "sequence,k_star,ate_full,ate_from_kstar,runtime_s\n";
    for (const auto& r : records) {
      out << r.sequence << ',' << r.k_star << ',' << fmt(r.ate_full) << ','
          << fmt(r.ate_from_kstar) << ',' << fmt(r.runtime_s) << '\n';
    }
  }
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : records) {
    doc.push_back({{"sequence", r.sequence},
                   {"k_star", r.k_star},
                   {"ate_full", r.ate_full},
                   {"ate_from_kstar", r.ate_from_kstar},
                   {"runtime_s", r.runtime_s}});
  }
  auto out = open_out(stem + ".json");
  out << doc.dump(2) << '\n';
}

std::vector<RunRecord> read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw IoError("cannot open " + path);
  nlohmann::json doc;
  in >> doc;
  std::vector<RunRecord> out;
  for (const auto& item : doc) {
    RunRecord r;
    r.sequence = item.at("sequence").get<std::string>();
    r.k_star = item.at("k_star").get<int>();
    r.ate_full = item.at("ate_full").get<double>();
    r.ate_from_kstar = item.at("ate_from_kstar").get<double>();
    r.runtime_s = item.at("runtime_s").get<double>();
    out.push_back(r);
  }
  return out;
}

std::vector<RunRecord> read_report_csv(const std::string& path) {
  std::vector<RunRecord> out;
  for_each_row(path, [&](const std::vector<std::string>& f, std::size_t line) {
    require_fields(f, 5, line);
    RunRecord r;
    r.sequence = f[0];
    r.k_star = static_cast<int>(parse_double(f[1], line));
    r.ate_full = parse_double(f[2], line);
    r.ate_from_kstar = parse_double(f[3], line);
    r.runtime_s = parse_double(f[4], line);
    out.push_back(r);
  });
  return out;
}

void write_trigger_trace_csv(const TriggerTrace& trace, const std::string& path) {
  auto out = open_out(path);
  out << "k,s1,s2,s3,s4,s5,s6,rho,delta_rho,fired\n";
  for (const auto& rec : trace.records) {
    out << rec.epoch;
    for (int a = 0; a < 6; ++a) out << ',' << fmt(rec.singular_values(a));
    out << ',' << fmt(rec.sv_ratio) << ',' << fmt(rec.sv_ratio_rel_change) << ','
        << (rec.below_threshold ? 1 : 0) << '\n';
  }
}

void write_sweep_csv(std::span<const std::pair<int, double>> rows,
                     const std::string& path) {
  auto out = open_out(path);
  out << "activation_index,ate_rmse\n";
  for (const auto& [index, ate] : rows) {
    out << index << ',' << fmt(ate) << '\n';
  }
}

}  // namespace ginit
