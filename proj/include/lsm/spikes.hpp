#pragma once

// Spike rasters and windowed rate matrices shared by every stage of the
// pipeline. Time is integer milliseconds on the simulation grid.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lsm {

using TimeMs = std::int64_t;

struct SpikeEvent {
  std::size_t channel = 0;
  TimeMs time = 0;

  friend bool operator==(const SpikeEvent&, const SpikeEvent&) = default;
};

/// Set of spike events over `n_channels` channels in [0, duration).
///
/// Events are kept sorted by (time, channel) with no duplicates; the
/// constructor normalizes its input and throws std::invalid_argument for
/// out-of-range events.
class SpikeRaster {
 public:
  SpikeRaster() = default;
  SpikeRaster(std::size_t n_channels, TimeMs duration,
              std::vector<SpikeEvent> events = {});

  std::size_t n_channels() const { return n_channels_; }
  TimeMs duration() const { return duration_; }
  std::span<const SpikeEvent> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  /// Number of spikes per channel.
  std::vector<std::size_t> counts() const;

  friend bool operator==(const SpikeRaster&, const SpikeRaster&) = default;

 private:
  std::size_t n_channels_ = 0;
  TimeMs duration_ = 0;
  std::vector<SpikeEvent> events_;
};

/// Instantaneous rates (spikes/s), one row per unit and one column per step.
struct RateMatrix {
  Eigen::MatrixXd values;
  TimeMs step = 1;
  TimeMs window = 50;

  std::size_t n_units() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_steps() const { return static_cast<std::size_t>(values.cols()); }
};

/// Causal rectangular-window rate: spikes in (k*step - window, k*step]
/// divided by the full window, reported in spikes/s.
RateMatrix extract_rates(const SpikeRaster& raster, TimeMs window = 50,
                         TimeMs step = 1);

/// Joins rasters end to end. Returns the joined raster and each input's
/// start time.
std::pair<SpikeRaster, std::vector<TimeMs>> concat_rasters(
    std::span<const SpikeRaster> rasters);

/// Inverse of concat_rasters given the start times and total duration.
std::vector<SpikeRaster> split_raster(const SpikeRaster& raster,
                                      std::span<const TimeMs> boundaries);

/// Column-wise concatenation of rate matrices with matching rows and step.
/// Returns the joined matrix and the start time of each block.
std::pair<RateMatrix, std::vector<TimeMs>> concat_rates(
    std::span<const RateMatrix> blocks);

// Raster CSV:
//   # channels=<n> duration_ms=<d>
//   channel,time_ms
//   <c>,<t>
void write_raster_csv(const SpikeRaster& raster, std::ostream& out);
SpikeRaster read_raster_csv(std::istream& in);
void save_raster(const SpikeRaster& raster, const std::filesystem::path& path);
SpikeRaster load_raster(const std::filesystem::path& path);

}  // namespace lsm
