// Copyright 2026 The segpark Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "segpark/errors.hpp"
#include "segpark/scenario.hpp"

namespace segpark
{
namespace
{

constexpr char kMagic[4] = {'M', 'P', 'K', '1'};
constexpr int kSchemaVersion = 1;

static_assert(std::endian::native == std::endian::little, "dataset codec assumes a little-endian host");

class Writer
{
public:
  template <typename T>
  void put(T value)
  {
    const auto * p = reinterpret_cast<const std::uint8_t *>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_pose(const Pose2 & p)
  {
    put(p.x());
    put(p.y());
    put(p.psi());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
  std::vector<std::uint8_t> bytes_;
};

class Reader
{
public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t index) : bytes_(bytes), index_(index) {}

  template <typename T>
  T get(const char * what)
  {
    if (pos_ + sizeof(T) > bytes_.size()) {
      fail(std::string("truncated at ") + what);
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  double finite(const char * what)
  {
    const double v = get<double>(what);
    if (!std::isfinite(v)) {
      fail(std::string("non-finite ") + what);
    }
    return v;
  }
  Pose2 pose(const char * what)
  {
    // Sequenced reads; argument evaluation order is unspecified.
    const double x = finite(what);
    const double y = finite(what);
    const double psi = finite(what);
    return {x, y, psi};
  }
  [[noreturn]] void fail(const std::string & why) const
  {
    throw FormatError("dataset record " + std::to_string(index_) + ": " + why);
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t index_;
  std::size_t pos_{0};
};

}  // namespace

std::vector<std::uint8_t> encode_record(const DatasetRecord & record)
{
  const Scenario & sc = record.scenario;
  Writer w;
  w.put<std::uint64_t>(sc.id);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(sc.difficulty));
  w.put_pose(sc.ego_start);
  w.put_pose(sc.slot.pose);
  w.put(sc.slot.width);
  w.put(sc.slot.depth);

  const GridSpec & g = sc.grid.spec();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(g.height));
  w.put(g.resolution);
  w.put_pose(g.origin);

  // Run-length encoding of the cell array.
  std::vector<std::pair<std::uint16_t, std::uint8_t>> runs;
  for (std::uint8_t c : sc.grid.cells()) {
    if (!runs.empty() && runs.back().second == c && runs.back().first < 0xFFFF) {
      ++runs.back().first;
    } else {
      runs.emplace_back(1, c);
    }
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(runs.size()));
  for (const auto & [len, value] : runs) {
    w.put(len);
    w.put(value);
  }

  const ParkingPath & path = record.expert_path;
  w.put(path.score);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(path.segments.size()));
  for (const Segment & seg : path.segments) {
    w.put<std::int8_t>(static_cast<std::int8_t>(sign(seg.gear)));
    w.put<std::uint8_t>(seg.valid ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(seg.waypoints.size()));
    for (const Pose2 & p : seg.waypoints) {
      w.put_pose(p);
    }
  }
  return w.take();
}

DatasetRecord decode_record(std::span<const std::uint8_t> payload, std::size_t index)
{
  Reader r(payload, index);
  DatasetRecord rec;
  Scenario & sc = rec.scenario;
  sc.id = r.get<std::uint64_t>("id");
  const auto diff = r.get<std::uint8_t>("difficulty");
  if (diff > 2) {
    r.fail("bad difficulty " + std::to_string(diff));
  }
  sc.difficulty = static_cast<Difficulty>(diff);
  sc.ego_start = r.pose("ego pose");
  sc.slot.pose = r.pose("slot pose");
  sc.slot.width = r.finite("slot width");
  sc.slot.depth = r.finite("slot depth");
  if (!sc.slot.valid()) {
    r.fail("bad slot extent");
  }

  GridSpec g;
  const auto gw = r.get<std::uint32_t>("grid width");
  const auto gh = r.get<std::uint32_t>("grid height");
  if (gw == 0 || gh == 0 || gw > 100000 || gh > 100000) {
    r.fail("bad grid size");
  }
  g.width = static_cast<int>(gw);
  g.height = static_cast<int>(gh);
  g.resolution = r.finite("grid resolution");
  if (g.resolution <= 0.0) {
    r.fail("bad grid resolution");
  }
  g.origin = r.pose("grid origin");

  const std::size_t n_cells = static_cast<std::size_t>(gw) * gh;
  std::vector<std::uint8_t> cells;
  cells.reserve(n_cells);
  const auto n_runs = r.get<std::uint32_t>("run count");
  for (std::uint32_t i = 0; i < n_runs; ++i) {
    const auto len = r.get<std::uint16_t>("run length");
    const auto value = r.get<std::uint8_t>("run value");
    if (value > 1 || len == 0 || cells.size() + len > n_cells) {
      r.fail("bad occupancy run " + std::to_string(i));
    }
    cells.insert(cells.end(), len, value);
  }
  if (cells.size() != n_cells) {
    r.fail("occupancy runs cover " + std::to_string(cells.size()) + " of " +
           std::to_string(n_cells) + " cells");
  }
  sc.grid = OccupancyGrid(g, std::move(cells));

  ParkingPath & path = rec.expert_path;
  path.score = r.finite("path score");
  const auto n_seg = r.get<std::uint32_t>("segment count");
  if (n_seg > 1024) {
    r.fail("bad segment count");
  }
  for (std::uint32_t s = 0; s < n_seg; ++s) {
    Segment seg;
    const auto gear = r.get<std::int8_t>("gear");
    if (gear != 1 && gear != -1) {
      r.fail("bad gear in segment " + std::to_string(s));
    }
    seg.gear = gear > 0 ? Gear::kForward : Gear::kBackward;
    const auto valid = r.get<std::uint8_t>("valid flag");
    if (valid > 1) {
      r.fail("bad valid flag in segment " + std::to_string(s));
    }
    seg.valid = valid == 1;
    const auto n_wp = r.get<std::uint32_t>("waypoint count");
    if (n_wp > 1u << 16) {
      r.fail("bad waypoint count");
    }
    seg.waypoints.reserve(n_wp);
    for (std::uint32_t k = 0; k < n_wp; ++k) {
      seg.waypoints.push_back(r.pose("waypoint"));
    }
    path.segments.push_back(std::move(seg));
  }
  if (!r.done()) {
    r.fail("trailing bytes");
  }
  return rec;
}

void save_dataset(
  const std::vector<DatasetRecord> & records, const std::filesystem::path & path,
  const std::string & header_json)
{
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_json);
  } catch (const nlohmann::json::exception & e) {
    throw std::invalid_argument(std::string("save_dataset: header is not JSON: ") + e.what());
  }
  if (!header.is_object()) {
    throw std::invalid_argument("save_dataset: header must be a JSON object");
  }
  header["format"] = "mpk1";
  header["schema_version"] = kSchemaVersion;
  header["count"] = records.size();

  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(kMagic, sizeof(kMagic));
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  for (const auto & rec : records) {
    const auto payload = encode_record(rec);
    const auto len = static_cast<std::uint32_t>(payload.size());
    out.write(reinterpret_cast<const char *>(&len), sizeof(len));
    out.write(reinterpret_cast<const char *>(payload.data()), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

LoadedDataset load_dataset(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  if (data.size() < sizeof(kMagic) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + ": missing MPK1 magic");
  }
  const std::size_t eol = data.find('\n', sizeof(kMagic));
  if (eol == std::string::npos) {
    throw FormatError(path.string() + ": unterminated header");
  }
  LoadedDataset out;
  out.header_json = data.substr(sizeof(kMagic), eol - sizeof(kMagic));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(out.header_json);
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  if (header.value("format", "") != "mpk1") {
    throw FormatError(path.string() + ": header format is not mpk1");
  }

  const auto * bytes = reinterpret_cast<const std::uint8_t *>(data.data());
  std::size_t pos = eol + 1;
  std::size_t index = 0;
  while (pos < data.size()) {
    if (pos + 4 > data.size()) {
      throw FormatError("dataset record " + std::to_string(index) + ": truncated length prefix");
    }
    std::uint32_t len = 0;
    std::memcpy(&len, bytes + pos, sizeof(len));
    pos += 4;
    if (pos + len > data.size()) {
      throw FormatError("dataset record " + std::to_string(index) + ": payload truncated");
    }
    out.records.push_back(decode_record({bytes + pos, len}, index));
    pos += len;
    ++index;
  }
  if (header.contains("count") && header["count"].get<std::size_t>() != out.records.size()) {
    throw FormatError(
      "dataset record " + std::to_string(out.records.size()) + ": header declares " +
      std::to_string(header["count"].get<std::size_t>()) + " records");
  }
  return out;
}

}  // namespace segpark
