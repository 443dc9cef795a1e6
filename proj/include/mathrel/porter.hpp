#pragma once

#include <string>
#include <string_view>

namespace mathrel::porter {

// Porter suffix-stripping stemmer (steps 1a-5b) as distributed in the
// reference implementation: "bli"->"ble" and "logi"->"log" in step 2, words
// of length <= 2 unchanged, and terminal y -> i only when preceded by a
// non-initial consonant ("happy"->"happi", "buy"->"buy", "day"->"day").
// Input must be a lowercase alphabetic word.
std::string stem(std::string_view word);

}  // namespace mathrel::porter
