#include "chanrt/sensing/records.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "chanrt/error.hpp"
#include "chanrt/wire/codec.hpp"

namespace chanrt::sensing {

namespace {

using namespace std::chrono;

template <typename T>
bool parse_digits(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

namespace {

// Slow path for record_timestamps: full decode of the record at `offset`.
std::int64_t read_record_file_at(const fs::path& path, std::uint64_t offset) {
  const auto bytes = read_file(path);
  wire::ByteReader r(std::span<const std::uint8_t>(bytes).subspan(static_cast<std::size_t>(offset)));
  const auto len = r.u32();
  return record_from_wire(wire::decode(r.raw(len)).value).timestamp_ms;
}

}  // namespace

StoredRecord record_from(const Envelope& envelope) {
  return {envelope.channel, envelope.sequence, envelope.timestamp_ms, envelope.payload};
}

wire::WireValue to_wire(const StoredRecord& record) {
  wire::Struct s;
  s.type_name = "SampleRecord";
  s.add("channel", record.channel);
  s.add("sequence", static_cast<std::int64_t>(record.sequence));
  s.add("timestamp_ms", record.timestamp_ms);
  s.add("payload", record.payload);
  return s;
}

StoredRecord record_from_wire(const wire::WireValue& value) {
  const auto& s = value.as<wire::Struct>();
  if (s.type_name != "SampleRecord") throw Error(ErrorCode::InvalidStruct, "expected SampleRecord, got " + s.type_name);
  StoredRecord r;
  r.channel = s.at("channel").as<std::string>();
  r.sequence = static_cast<std::uint64_t>(s.at("sequence").as<std::int64_t>());
  r.timestamp_ms = s.at("timestamp_ms").as<std::int64_t>();
  r.payload = s.at("payload");
  return r;
}

wire::Bytes frame_record(const StoredRecord& record) {
  wire::Bytes out(4);
  wire::ByteWriter w(out);
  wire::encode_into(to_wire(record), w);
  const auto len = static_cast<std::uint32_t>(out.size() - 4);
  out[0] = static_cast<std::uint8_t>(len >> 24);
  out[1] = static_cast<std::uint8_t>(len >> 16);
  out[2] = static_cast<std::uint8_t>(len >> 8);
  out[3] = static_cast<std::uint8_t>(len);
  return out;
}

std::vector<StoredRecord> read_record_file(const fs::path& path) {
  const auto bytes = read_file(path);
  wire::ByteReader r(bytes);
  std::vector<StoredRecord> out;
  while (!r.done()) {
    const auto len = r.u32();
    const auto blob = r.raw(len);
    const auto decoded = wire::decode(blob);
    if (decoded.consumed != len) throw Error(ErrorCode::InvalidStruct, "record length disagrees with its encoding");
    out.push_back(record_from_wire(decoded.value));
  }
  return out;
}

std::size_t count_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_failure(path, "open", errno);
  const auto size = static_cast<std::uint64_t>(fs::file_size(path));
  std::uint64_t pos = 0;
  std::size_t n = 0;
  while (pos < size) {
    std::uint8_t h[4];
    if (size - pos < 4 || !in.read(reinterpret_cast<char*>(h), 4)) {
      throw Error(ErrorCode::TruncatedInput, fmt::format("{}: torn length prefix", path.string()));
    }
    const std::uint64_t len = (std::uint64_t{h[0]} << 24) | (std::uint64_t{h[1]} << 16) | (std::uint64_t{h[2]} << 8) | h[3];
    pos += 4 + len;
    if (pos > size) throw Error(ErrorCode::TruncatedInput, fmt::format("{}: torn record", path.string()));
    in.seekg(static_cast<std::streamoff>(pos));
    ++n;
  }
  return n;
}

std::vector<std::int64_t> record_timestamps(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_failure(path, "open", errno);
  const auto size = static_cast<std::uint64_t>(fs::file_size(path));
  std::vector<std::int64_t> out;
  std::uint64_t pos = 0;
  std::vector<std::uint8_t> head;
  while (pos < size) {
    std::uint8_t h[4];
    if (size - pos < 4 || !in.read(reinterpret_cast<char*>(h), 4)) {
      throw Error(ErrorCode::TruncatedInput, fmt::format("{}: torn length prefix", path.string()));
    }
    const std::uint64_t len = (std::uint64_t{h[0]} << 24) | (std::uint64_t{h[1]} << 16) | (std::uint64_t{h[2]} << 8) | h[3];
    if (pos + 4 + len > size) throw Error(ErrorCode::TruncatedInput, fmt::format("{}: torn record", path.string()));
    // channel, sequence and timestamp_ms lead the struct, so a short prefix
    // is enough unless the channel name is unusually long.
    head.resize(static_cast<std::size_t>(std::min<std::uint64_t>(len, 512)));
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    std::optional<std::int64_t> ts;
    try {
      wire::ByteReader r(head);
      if (r.u8() != static_cast<std::uint8_t>(wire::Tag::Struct) || r.str() != "SampleRecord") {
        throw Error(ErrorCode::InvalidStruct, "not a SampleRecord");
      }
      const auto n = r.u32();
      for (std::uint32_t i = 0; i < n && !ts; ++i) {
        const auto name = r.str();
        const auto v = wire::decode_from(r);
        if (name == "timestamp_ms") ts = v.as<std::int64_t>();
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TruncatedInput || head.size() == len) throw;
    }
    if (!ts) ts = read_record_file_at(path, pos);
    out.push_back(*ts);
    pos += 4 + len;
    in.seekg(static_cast<std::streamoff>(pos));
  }
  return out;
}

std::size_t count_framed(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0, n = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 4) throw Error(ErrorCode::TruncatedInput, "torn length prefix");
    const std::size_t len = (std::size_t{bytes[pos]} << 24) | (std::size_t{bytes[pos + 1]} << 16) |
                            (std::size_t{bytes[pos + 2]} << 8) | bytes[pos + 3];
    pos += 4 + len;
    if (pos > bytes.size()) throw Error(ErrorCode::TruncatedInput, "torn record");
    ++n;
  }
  return n;
}

std::string minute_file_name(std::int64_t timestamp_ms) {
  const sys_time<milliseconds> t{milliseconds(timestamp_ms)};
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const auto hm = floor<minutes>(t - day);
  return fmt::format("{:04}{:02}{:02}_{:02}{:02}.rec", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()), hm.count() / 60, hm.count() % 60);
}

fs::path record_path(const fs::path& storage_root, const std::string& channel, std::int64_t timestamp_ms) {
  return storage_root / channel / minute_file_name(timestamp_ms);
}

std::optional<std::int64_t> minute_of_file(const std::string& file_name) {
  // YYYYMMDD_HHMM.rec
  if (file_name.size() != 17 || file_name[8] != '_' || file_name.substr(13) != ".rec") return std::nullopt;
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0;
  const std::string_view s(file_name);
  if (!parse_digits(s.substr(0, 4), y) || !parse_digits(s.substr(4, 2), mo) || !parse_digits(s.substr(6, 2), d) ||
      !parse_digits(s.substr(9, 2), h) || !parse_digits(s.substr(11, 2), mi)) {
    return std::nullopt;
  }
  const year_month_day ymd{year(y), month(mo), day(d)};
  if (!ymd.ok() || h > 23 || mi > 59) return std::nullopt;
  const auto t = sys_days(ymd) + hours(h) + minutes(mi);
  return duration_cast<milliseconds>(t.time_since_epoch()).count();
}

fs::path chunk_path(const std::string& prefix, std::int64_t timestamp_ms) {
  const bool joined = !prefix.empty() && prefix.back() == '_';
  return fs::path(fmt::format("{}{}{}.chunk", prefix, joined ? "" : "_", timestamp_ms));
}

std::optional<std::int64_t> chunk_time(const std::string& file_name) {
  constexpr std::string_view ext = ".chunk";
  if (file_name.size() <= ext.size() || file_name.compare(file_name.size() - ext.size(), ext.size(), ext) != 0) {
    return std::nullopt;
  }
  const auto stem = std::string_view(file_name).substr(0, file_name.size() - ext.size());
  const auto us = stem.rfind('_');
  if (us == std::string_view::npos) return std::nullopt;
  std::int64_t ms = 0;
  if (!parse_digits(stem.substr(us + 1), ms)) return std::nullopt;
  return ms;
}

}  // namespace chanrt::sensing
