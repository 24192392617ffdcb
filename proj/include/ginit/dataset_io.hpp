#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ginit/trigger.hpp"
#include "ginit/types.hpp"

namespace ginit {

enum class TimeUnit { Nanoseconds, Seconds };

/// Shared stream epoch so IMU, ground truth and GNSS stay on one timebase.
/// Nanosecond stamps are tracked as integers to keep differences exact.
struct TimeOrigin {
  bool set = false;
  std::int64_t ns = 0;
  double sec = 0.0;
};

struct DatasetManifest {
  std::string imu_path;
  std::string groundtruth_path;  // empty = absent
  std::string gnss_path;         // empty = absent
  TimeUnit time_unit = TimeUnit::Nanoseconds;
  std::string gravity_frame_note = "world z-up, gravity along -z";

  // synthesis settings, used when gnss_path is absent and ground truth is given
  double synth_sigma = 0.2;  // m
  double synth_rate = 5.0;   // Hz
  std::uint64_t synth_seed = 0;
};

struct GroundTruthSample {
  double timestamp = 0.0;
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 velocity = Vec3::Zero();
  bool has_velocity = false;
};

// CSV loaders. Lines starting with '#' and a leading header line are skipped;
// fields are parsed locale-independently and non-finite values are rejected.
// Timestamps are converted to seconds from the origin (captured from the first
// row when the origin is unset). Throw ParseError / NonMonotonicTimestamps.
std::vector<ImuSample> load_imu(const std::string& path, TimeUnit unit,
                                TimeOrigin* origin = nullptr);
std::vector<GroundTruthSample> load_groundtruth(const std::string& path,
                                                TimeUnit unit,
                                                TimeOrigin* origin = nullptr);
std::vector<GnssMeasurement> load_gnss(const std::string& path, TimeUnit unit,
                                       TimeOrigin* origin = nullptr);

struct LoadedDataset {
  std::vector<ImuSample> imu;
  std::vector<GroundTruthSample> groundtruth;
  std::vector<GnssMeasurement> gnss;
};

/// Loads per the manifest on a shared timebase; synthesizes GNSS from ground
/// truth when no GNSS file is configured.
LoadedDataset load_dataset(const DatasetManifest& manifest);

/// Uniform-rate position fixes sampled from ground truth (linear interpolation)
/// plus zero-mean Gaussian noise; covariance sigma^2 I. Deterministic per seed.
std::vector<GnssMeasurement> synthesize_gnss(
    std::span<const GroundTruthSample> groundtruth, double sigma, double rate,
    std::uint64_t seed);

// mirrored writers (lossless at printed precision)
void write_imu_csv(std::span<const ImuSample> samples, const std::string& path);
void write_groundtruth_csv(std::span<const GroundTruthSample> samples,
                           const std::string& path);
void write_gnss_csv(std::span<const GnssMeasurement> samples,
                    const std::string& path);

/// One pipeline run, mirroring the per-sequence result table columns.
struct RunRecord {
  std::string sequence;
  int k_star = -1;
  double ate_full = 0.0;
  double ate_from_kstar = 0.0;
  double runtime_s = 0.0;
};

/// Writes <stem>.csv and <stem>.json with identical content. Throws IoError.
void write_report(std::span<const RunRecord> records, const std::string& stem);
std::vector<RunRecord> read_report_json(const std::string& path);
std::vector<RunRecord> read_report_csv(const std::string& path);

void write_trigger_trace_csv(const TriggerTrace& trace, const std::string& path);
void write_sweep_csv(std::span<const std::pair<int, double>> rows,
                     const std::string& path);

}  // namespace ginit
