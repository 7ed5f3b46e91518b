#pragma once

#include <cstdint>
#include <vector>

#include "mixsim/bytes.hpp"
#include "mixsim/error.hpp"

namespace mixsim::simnet {

/// Each cell is a u16 length of the data it carries followed by `capacity`
/// data bytes (zero-padded in the last cell).
inline constexpr std::size_t kCellHeaderSize = 2;

inline std::vector<Bytes> fragment(ByteView payload, std::size_t capacity) {
  if (capacity == 0 || capacity > 0xFFFF) fail(Errc::InvalidConfig, "cell capacity must be in [1, 65535]");
  std::vector<Bytes> cells;
  std::size_t offset = 0;
  do {
    const std::size_t take = std::min(capacity, payload.size() - offset);
    Bytes cell;
    cell.reserve(kCellHeaderSize + capacity);
    put_u16(cell, static_cast<std::uint16_t>(take));
    cell.insert(cell.end(), payload.begin() + offset, payload.begin() + offset + take);
    cell.resize(kCellHeaderSize + capacity, 0);
    cells.push_back(std::move(cell));
    offset += take;
  } while (offset < payload.size());
  return cells;
}

inline Bytes reassemble(const std::vector<Bytes>& cells) {
  Bytes out;
  for (const auto& cell : cells) {
    if (cell.size() < kCellHeaderSize) fail(Errc::MalformedTrace, "cell shorter than its header");
    const std::size_t len = get_u16(cell, 0);
    if (kCellHeaderSize + len > cell.size()) fail(Errc::MalformedTrace, "cell length header out of range");
    out.insert(out.end(), cell.begin() + kCellHeaderSize, cell.begin() + kCellHeaderSize + len);
  }
  return out;
}

}  // namespace mixsim::simnet
