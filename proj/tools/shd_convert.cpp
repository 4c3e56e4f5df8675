// Converts the Spiking Heidelberg Digits HDF5 layout (/spikes/times,
// /spikes/units as variable-length arrays, /labels) into the SPKE container.

#include <hdf5.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spsn/data.hpp"
#include "spsn/errors.hpp"

namespace {

class Handle {
public:
  Handle(hid_t id, herr_t (*close)(hid_t), const std::string& what) : id_(id), close_(close) {
    if (id_ < 0) throw spsn::IoError("HDF5: cannot open " + what);
  }
  ~Handle() { close_(id_); }
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  operator hid_t() const { return id_; }

private:
  hid_t id_;
  herr_t (*close_)(hid_t);
};

hsize_t length_of(hid_t dataset) {
  Handle space(H5Dget_space(dataset), H5Sclose, "dataspace");
  if (H5Sget_simple_extent_ndims(space) != 1) throw spsn::IoError("HDF5: expected 1-D dataset");
  hsize_t n = 0;
  H5Sget_simple_extent_dims(space, &n, nullptr);
  return n;
}

template <typename T>
std::vector<std::vector<T>> read_ragged(hid_t file, const char* name, hid_t native) {
  Handle ds(H5Dopen2(file, name, H5P_DEFAULT), H5Dclose, name);
  const auto n = length_of(ds);
  Handle memtype(H5Tvlen_create(native), H5Tclose, "vlen type");
  std::vector<hvl_t> raw(n);
  if (H5Dread(ds, memtype, H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data()) < 0) {
    throw spsn::IoError(std::string("HDF5: cannot read ") + name);
  }
  std::vector<std::vector<T>> out(n);
  for (hsize_t i = 0; i < n; ++i) {
    const auto* p = static_cast<const T*>(raw[i].p);
    out[i].assign(p, p + raw[i].len);
  }
  Handle space(H5Dget_space(ds), H5Sclose, "dataspace");
  H5Dvlen_reclaim(memtype, space, H5P_DEFAULT, raw.data());
  return out;
}

std::vector<std::uint16_t> read_labels(hid_t file) {
  Handle ds(H5Dopen2(file, "/labels", H5P_DEFAULT), H5Dclose, "/labels");
  std::vector<std::uint16_t> labels(length_of(ds));
  if (H5Dread(ds, H5T_NATIVE_UINT16, H5S_ALL, H5S_ALL, H5P_DEFAULT, labels.data()) < 0) {
    throw spsn::IoError("HDF5: cannot read /labels");
  }
  return labels;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convert an SHD HDF5 file into an SPKE event container"};
  std::string input, output;
  std::uint32_t channels = 700, classes = 20;
  double duration = 0.0;
  bool force = false;
  app.add_option("input", input, "SHD .h5 file")->required()->check(CLI::ExistingFile);
  app.add_option("output", output, "SPKE file to write")->required();
  app.add_option("--channels", channels, "input channel count")->capture_default_str();
  app.add_option("--classes", classes, "class count")->capture_default_str();
  app.add_option("--duration", duration,
                 "sample duration in seconds (0: last event of each sample + 1 us)");
  app.add_flag("--force", force, "overwrite the output");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!force && std::filesystem::exists(output)) {
      throw spsn::IoError(output + " already exists (pass --force to overwrite)");
    }
    H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
    Handle file(H5Fopen(input.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose, input);
    const auto times = read_ragged<float>(file, "/spikes/times", H5T_NATIVE_FLOAT);
    const auto units = read_ragged<std::uint16_t>(file, "/spikes/units", H5T_NATIVE_UINT16);
    const auto labels = read_labels(file);
    if (times.size() != units.size() || times.size() != labels.size()) {
      throw spsn::DataError(spsn::DataErrorKind::ShapeMismatch,
                            "times, units and labels disagree in sample count");
    }

    spsn::EventDataset ds;
    ds.channel_count = channels;
    ds.class_count = classes;
    ds.samples.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i].size() != units[i].size()) {
        throw spsn::DataError(spsn::DataErrorKind::ShapeMismatch,
                              "sample " + std::to_string(i) + ": times/units length differ");
      }
      auto& s = ds.samples[i];
      s.label = labels[i];
      for (std::size_t e = 0; e < times[i].size(); ++e) {
        const auto us = std::llround(static_cast<double>(times[i][e]) * 1e6);
        s.events.push_back({static_cast<std::uint64_t>(std::max<long long>(0, us)), units[i][e]});
      }
      std::stable_sort(s.events.begin(), s.events.end(),
                       [](const spsn::Event& a, const spsn::Event& b) { return a.time_us < b.time_us; });
      if (duration > 0.0) {
        s.duration_us = static_cast<std::uint64_t>(std::llround(duration * 1e6));
        std::erase_if(s.events, [&](const spsn::Event& e) { return e.time_us >= s.duration_us; });
      } else {
        s.duration_us = s.events.empty() ? 1 : s.events.back().time_us + 1;
      }
    }
    spsn::save_dataset(ds, output);
    std::printf("wrote %zu samples to %s\n", ds.samples.size(), output.c_str());
  } catch (const spsn::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const spsn::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 5;
  }
  return 0;
}
