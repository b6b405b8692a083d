#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "loadbench/core.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("loadbench-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  fs::path path_;
};

inline loadbench::HourStamp hour_stamp(int y, unsigned m, unsigned d, int h = 0) {
  using namespace std::chrono;
  return loadbench::HourStamp{sys_days{year{y} / month{m} / day{d}}} + hours(h);
}

inline loadbench::BuildingRecord record(const std::string& id,
                                        loadbench::BuildingType type = loadbench::BuildingType::Residential,
                                        const std::string& dataset = "test") {
  loadbench::BuildingRecord r;
  r.id = id;
  r.building_type = type;
  r.latitude = 40.0;
  r.longitude = -100.0;
  r.region_id = "R00";
  r.dataset_name = dataset;
  return r;
}

}  // namespace testing
