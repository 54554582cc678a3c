#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "trajcrit/ingest.hpp"
#include "trajcrit/model.hpp"

namespace support {

namespace fs = std::filesystem;

// Fresh scratch directory per test process.
inline fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("trajcrit_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Location 1: upper road 1 (emergency), 2, 3, 4; lower road 8, 7, 6.
inline trajcrit::LaneLayout location1() {
  return trajcrit::ingest::build_layout(1, {8.0, 11.75, 15.5, 19.25}, {23.25, 27.0, 30.75, 34.5});
}

// Constant-speed normalized track on one lane.
inline trajcrit::Track cruise(int id, trajcrit::Direction d, int lane, double front0, double v, int first_frame,
                              int frames, double fr = 25.0, double length = 4.5) {
  trajcrit::Track t;
  t.id = id;
  t.length = length;
  t.width = 1.8;
  t.direction = d;
  t.normalized = true;
  for (int k = 0; k < frames; ++k) {
    trajcrit::FrameState f;
    f.frame = first_frame + k;
    f.x = front0 + v * k / fr;
    f.vx = v;
    f.lane_id = lane;
    t.frames.push_back(f);
  }
  return t;
}

inline trajcrit::Recording empty_recording(double fr = 25.0, double duration = 60.0, double seg_len = 400.0) {
  trajcrit::Recording r;
  r.info.id = 1;
  r.info.frame_rate = fr;
  r.info.duration = duration;
  r.layout = location1();
  r.segment = {0.0, seg_len};
  return r;
}

}  // namespace support
