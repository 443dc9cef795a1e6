#pragma once

#include <string>

// Test-only oracle: a direct port of the classic C reference implementation
// of the Porter stemmer, kept structurally independent of the library's
// implementation. Same variant choices: "bli"->"ble", "logi"->"log",
// words of length <= 2 unchanged, terminal y -> i only after a non-initial
// consonant.
namespace porter_reference {

std::string stem(const std::string& word);

}  // namespace porter_reference
