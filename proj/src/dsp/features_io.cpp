#include "wasncal/dsp/features_io.hpp"

namespace wasncal::dsp {

void write_diffuseness(const std::filesystem::path& path, const DiffusenessMap& map, const DiffusenessConfig& config,
                       json meta) {
  meta["kind"] = "diffuseness";
  meta["band_bins"] = {map.band.first_bin, map.band.last_bin};
  meta["band_hz"] = {config.band_lo_hz, config.band_hi_hz};
  meta["fs"] = config.stft.sample_rate;
  meta["window_length"] = config.stft.window_length;
  meta["shift"] = config.stft.shift;
  meta["fft_size"] = config.stft.fft_size;
  meta["forgetting"] = config.forgetting;
  meta["zeta"] = map.zeta;
  write_raw_f32(path, to_raw(map.values, std::move(meta)));
}

DiffusenessMap read_diffuseness(const std::filesystem::path& path) {
  const auto raw = read_raw_f32(path);
  DiffusenessMap map;
  map.values = matrix_from_raw(raw);
  map.band.first_bin = raw.meta.at("band_bins")[0].get<int>();
  map.band.last_bin = raw.meta.at("band_bins")[1].get<int>();
  map.zeta = map.values.size() ? map.values.mean() : 0.0;
  return map;
}

void write_mfcc(const std::filesystem::path& path, const Eigen::MatrixXd& coeffs, json meta) {
  meta["kind"] = "mfcc";
  write_raw_f32(path, to_raw(coeffs, std::move(meta)));
}

Eigen::MatrixXd read_mfcc(const std::filesystem::path& path) { return matrix_from_raw(read_raw_f32(path)); }

}  // namespace wasncal::dsp
