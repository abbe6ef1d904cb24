#include "wasncal/scene/rir.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "wasncal/errors.hpp"

namespace wasncal::scene {

namespace {

constexpr int kInterpTaps = 16;
constexpr int kFracSteps = 256;
constexpr double kFixedScale = 1099511627776.0;  // 2^40

// Fractional-delay filters: row f holds the taps for delay n0 + f/kFracSteps,
// tap t lands at sample n0 - kInterpTaps/2 + 1 + t.
struct DelayTable {
  std::array<std::array<double, kInterpTaps>, kFracSteps> taps{};

  DelayTable() {
    constexpr double pi = std::numbers::pi;
    for (int f = 0; f < kFracSteps; ++f) {
      const double frac = static_cast<double>(f) / kFracSteps;
      for (int t = 0; t < kInterpTaps; ++t) {
        const double x = (t - kInterpTaps / 2 + 1) - frac;
        const double sinc = x == 0.0 ? 1.0 : std::sin(pi * x) / (pi * x);
        const double window = 0.5 * (1.0 + std::cos(2.0 * pi * x / kInterpTaps));
        taps[static_cast<std::size_t>(f)][static_cast<std::size_t>(t)] = sinc * window;
      }
    }
  }
};

const DelayTable& delay_table() {
  static const DelayTable table;
  return table;
}

}  // namespace

double reflection_coefficient(const RoomSpec& room) {
  const double lx = room.length_x, ly = room.length_y, lz = room.height;
  const double volume = lx * ly * lz;
  const double surface = 2.0 * (lx * ly + lx * lz + ly * lz);
  // Eyring: T60 = 24 ln(10) V / (-c S ln(1 - alpha)), beta = sqrt(1 - alpha).
  const double log_one_minus_alpha = -24.0 * std::numbers::ln10 * volume / (room.sound_speed * surface * room.t60);
  return std::exp(0.5 * log_one_minus_alpha);
}

int default_num_taps(const RoomSpec& room, double fs) { return static_cast<int>(std::ceil(fs * room.t60)); }

Rir simulate_rir(const RoomSpec& room, const Vec3& source_pos, const Vec3& mic_pos, double fs, int num_taps,
                 const RirOptions& options) {
  if (!room.contains_strictly(source_pos)) throw DomainError("source position on or outside the room");
  if (!room.contains_strictly(mic_pos)) throw DomainError("microphone position on or outside the room");
  if (num_taps <= 0 || !(fs > 0.0)) throw DomainError("RIR length and sample rate must be positive");
  if ((source_pos - mic_pos).norm() == 0.0) throw DomainError("source and microphone coincide");

  const double beta = options.reflection ? *options.reflection : reflection_coefficient(room);
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("reflection coefficient must lie in [0, 1)");

  const Vec3 dims = room.dimensions();
  const double samples_per_meter = fs / room.sound_speed;
  // Images farther than this cannot reach the response window.
  const double max_dist = (num_taps + kInterpTaps) / samples_per_meter;
  Eigen::Vector3i order;
  for (int a = 0; a < 3; ++a) order[a] = static_cast<int>(std::ceil(max_dist / (2.0 * dims[a]))) + 1;

  const int max_exponent = 2 * (order.sum() + 3);
  std::vector<double> beta_pow(static_cast<std::size_t>(max_exponent + 1), 1.0);
  for (std::size_t e = 1; e < beta_pow.size(); ++e) beta_pow[e] = beta_pow[e - 1] * beta;

  std::vector<std::int64_t> acc(static_cast<std::size_t>(num_taps), 0);
  const auto& table = delay_table();
  const double inv_4pi = 1.0 / (4.0 * std::numbers::pi);

  // (s - r) and (-s - r) per axis; keeps the arithmetic symmetric in s and r.
  const Vec3 base_direct = source_pos - mic_pos;
  const Vec3 base_mirror = -source_pos - mic_pos;

  for (int mx = -order.x(); mx <= order.x(); ++mx) {
    const double rmx = 2.0 * mx * dims.x();
    for (int qx = 0; qx <= 1; ++qx) {
      const double dx = (qx ? base_mirror.x() : base_direct.x()) + rmx;
      const int ex = std::abs(mx - qx) + std::abs(mx);
      for (int my = -order.y(); my <= order.y(); ++my) {
        const double rmy = 2.0 * my * dims.y();
        for (int qy = 0; qy <= 1; ++qy) {
          const double dy = (qy ? base_mirror.y() : base_direct.y()) + rmy;
          const int ey = std::abs(my - qy) + std::abs(my);
          const double dxy2 = dx * dx + dy * dy;
          if (dxy2 > max_dist * max_dist) continue;
          for (int mz = -order.z(); mz <= order.z(); ++mz) {
            const double rmz = 2.0 * mz * dims.z();
            for (int qz = 0; qz <= 1; ++qz) {
              const int reflections = std::abs(2 * mx - qx) + std::abs(2 * my - qy) + std::abs(2 * mz - qz);
              if (options.max_order >= 0 && reflections > options.max_order) continue;
              const double dz = (qz ? base_mirror.z() : base_direct.z()) + rmz;
              const double dist = std::sqrt(dxy2 + dz * dz);
              if (dist > max_dist) continue;
              const int ez = std::abs(mz - qz) + std::abs(mz);
              const double gain = beta_pow[static_cast<std::size_t>(ex + ey + ez)] * inv_4pi / dist;
              if (gain == 0.0) continue;

              const double delay = dist * samples_per_meter;
              long n0 = static_cast<long>(std::floor(delay));
              long f = std::lround((delay - static_cast<double>(n0)) * kFracSteps);
              if (f == kFracSteps) {
                f = 0;
                ++n0;
              }
              const auto& row = table.taps[static_cast<std::size_t>(f)];
              const long first = n0 - kInterpTaps / 2 + 1;
              for (int t = 0; t < kInterpTaps; ++t) {
                const long n = first + t;
                if (n < 0 || n >= num_taps) continue;
                acc[static_cast<std::size_t>(n)] +=
                    static_cast<std::int64_t>(std::llround(gain * row[static_cast<std::size_t>(t)] * kFixedScale));
              }
            }
          }
        }
      }
    }
  }

  Rir rir;
  rir.sample_rate = fs;
  rir.source_pos = source_pos;
  rir.mic_pos = mic_pos;
  rir.taps.resize(num_taps);
  for (int n = 0; n < num_taps; ++n) rir.taps[n] = static_cast<double>(acc[static_cast<std::size_t>(n)]) / kFixedScale;
  return rir;
}

double measure_t60(const Eigen::Ref<const Eigen::VectorXd>& taps, double fs) {
  const Eigen::Index n = taps.size();
  if (n < 2) throw MeasurementUnavailable("RIR too short for decay measurement");
  Eigen::VectorXd edc(n);
  double tail = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    tail += taps[i] * taps[i];
    edc[i] = tail;
  }
  if (!(edc[0] > 0.0)) throw MeasurementUnavailable("RIR has no energy");

  Eigen::Index begin = -1, end = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double db = 10.0 * std::log10(edc[i] / edc[0]);
    if (begin < 0 && db <= -5.0) begin = i;
    if (db >= -25.0) end = i;
  }
  const Eigen::Index min_len = std::max<Eigen::Index>(4, static_cast<Eigen::Index>(std::ceil(0.005 * fs)));
  if (begin < 0 || end < 0 || end - begin + 1 < min_len || edc[n - 1] / edc[0] > std::pow(10.0, -2.5))
    throw MeasurementUnavailable("energy decay does not cover -5 dB to -25 dB");

  // Least-squares line through (t, dB) on [begin, end].
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double cnt = static_cast<double>(end - begin + 1);
  for (Eigen::Index i = begin; i <= end; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double y = 10.0 * std::log10(edc[i] / edc[0]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double slope = (cnt * sty - st * sy) / (cnt * stt - st * st);
  if (!(slope < 0.0)) throw MeasurementUnavailable("energy decay curve is not decreasing");
  return -60.0 / slope;
}

}  // namespace wasncal::scene
