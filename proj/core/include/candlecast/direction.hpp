#pragma once

#include <string_view>

namespace candlecast {

/// Binary next-day price direction. Up is the positive class everywhere
/// (confusion counts, class index 1 in the network output head).
enum class Direction : int {
    Down = 0,
    Up = 1,
};

inline std::string_view to_string(Direction d) {
    return d == Direction::Up ? "up" : "down";
}

} // namespace candlecast
