#include "lsm/spikes.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lsm {

SpikeRaster::SpikeRaster(std::size_t n_channels, TimeMs duration,
                         std::vector<SpikeEvent> events)
    : n_channels_(n_channels), duration_(duration), events_(std::move(events)) {
  if (duration_ < 0) throw std::invalid_argument("raster duration must be >= 0");
  for (const auto& e : events_) {
    if (e.channel >= n_channels_)
      throw std::invalid_argument("spike channel " + std::to_string(e.channel) +
                                  " out of range");
    if (e.time < 0 || e.time >= duration_)
      throw std::invalid_argument("spike time " + std::to_string(e.time) +
                                  " outside [0, duration)");
  }
  std::sort(events_.begin(), events_.end(), [](const auto& a, const auto& b) {
    return a.time != b.time ? a.time < b.time : a.channel < b.channel;
  });
  events_.erase(std::unique(events_.begin(), events_.end()), events_.end());
}

std::vector<std::size_t> SpikeRaster::counts() const {
  std::vector<std::size_t> c(n_channels_, 0);
  for (const auto& e : events_) ++c[e.channel];
  return c;
}

RateMatrix extract_rates(const SpikeRaster& raster, TimeMs window, TimeMs step) {
  if (window <= 0 || step <= 0)
    throw std::invalid_argument("window and step must be positive");
  if (window % step != 0)
    throw std::invalid_argument("window must be a multiple of step");
  if (raster.n_channels() == 0)
    throw std::invalid_argument("raster has no channels");

  const TimeMs n_steps = (raster.duration() + step - 1) / step;
  const auto rows = static_cast<Eigen::Index>(raster.n_channels());
  // Difference array: a spike at t raises columns ceil(t/step) up to the
  // last column whose window still contains t.
  Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(rows, n_steps + 1);
  for (const auto& e : raster.events()) {
    const TimeMs first = (e.time + step - 1) / step;
    const TimeMs past_last = std::min<TimeMs>((e.time + window + step - 1) / step, n_steps);
    if (first >= n_steps) continue;
    diff(static_cast<Eigen::Index>(e.channel), first) += 1.0;
    diff(static_cast<Eigen::Index>(e.channel), past_last) -= 1.0;
  }

  RateMatrix out;
  out.step = step;
  out.window = window;
  out.values.resize(rows, n_steps);
  const double scale = 1000.0 / static_cast<double>(window);
  Eigen::VectorXd running = Eigen::VectorXd::Zero(rows);
  for (TimeMs k = 0; k < n_steps; ++k) {
    running += diff.col(k);
    out.values.col(k) = running * scale;
  }
  return out;
}

std::pair<SpikeRaster, std::vector<TimeMs>> concat_rasters(
    std::span<const SpikeRaster> rasters) {
  if (rasters.empty()) throw std::invalid_argument("no rasters to concatenate");
  const std::size_t channels = rasters.front().n_channels();
  std::vector<SpikeEvent> events;
  std::vector<TimeMs> boundaries;
  TimeMs offset = 0;
  for (const auto& r : rasters) {
    if (r.n_channels() != channels)
      throw std::invalid_argument("rasters have mismatched channel counts");
    boundaries.push_back(offset);
    for (const auto& e : r.events()) events.push_back({e.channel, e.time + offset});
    offset += r.duration();
  }
  return {SpikeRaster(channels, offset, std::move(events)), std::move(boundaries)};
}

std::vector<SpikeRaster> split_raster(const SpikeRaster& raster,
                                      std::span<const TimeMs> boundaries) {
  std::vector<SpikeRaster> out;
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    const TimeMs begin = boundaries[i];
    const TimeMs end = i + 1 < boundaries.size() ? boundaries[i + 1] : raster.duration();
    if (end < begin || end > raster.duration())
      throw std::invalid_argument("boundaries must be ascending within the raster");
    std::vector<SpikeEvent> events;
    for (const auto& e : raster.events())
      if (e.time >= begin && e.time < end) events.push_back({e.channel, e.time - begin});
    out.emplace_back(raster.n_channels(), end - begin, std::move(events));
  }
  return out;
}

std::pair<RateMatrix, std::vector<TimeMs>> concat_rates(
    std::span<const RateMatrix> blocks) {
  if (blocks.empty()) throw std::invalid_argument("no rate blocks to concatenate");
  const auto& first = blocks.front();
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    if (b.values.rows() != first.values.rows() || b.step != first.step ||
        b.window != first.window)
      throw std::invalid_argument("rate blocks have mismatched shape or step");
    cols += b.values.cols();
  }
  RateMatrix out;
  out.step = first.step;
  out.window = first.window;
  out.values.resize(first.values.rows(), cols);
  std::vector<TimeMs> boundaries;
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    boundaries.push_back(at * first.step);
    out.values.middleCols(at, b.values.cols()) = b.values;
    at += b.values.cols();
  }
  return {std::move(out), std::move(boundaries)};
}

void write_raster_csv(const SpikeRaster& raster, std::ostream& out) {
  out << "# channels=" << raster.n_channels() << " duration_ms=" << raster.duration()
      << "\nchannel,time_ms\n";
  for (const auto& e : raster.events()) out << e.channel << ',' << e.time << '\n';
}

SpikeRaster read_raster_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw std::runtime_error("raster CSV: missing metadata line");
  std::size_t channels = 0;
  TimeMs duration = -1;
  {
    std::istringstream meta(line.substr(2));
    std::string kv;
    while (meta >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      const auto key = kv.substr(0, eq);
      const auto value = kv.substr(eq + 1);
      if (key == "channels") channels = std::stoul(value);
      if (key == "duration_ms") duration = std::stoll(value);
    }
  }
  if (duration < 0) throw std::runtime_error("raster CSV: metadata lacks duration_ms");
  if (!std::getline(in, line) || line.rfind("channel,time_ms", 0) != 0)
    throw std::runtime_error("raster CSV: missing header");
  std::vector<SpikeEvent> events;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("raster CSV: bad row '" + line + "'");
    events.push_back({std::stoul(line.substr(0, comma)), std::stoll(line.substr(comma + 1))});
  }
  return SpikeRaster(channels, duration, std::move(events));
}

void save_raster(const SpikeRaster& raster, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_raster_csv(raster, out);
}

SpikeRaster load_raster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_raster_csv(in);
}

}  // namespace lsm
