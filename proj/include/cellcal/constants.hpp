#pragma once

namespace cellcal {

inline constexpr double kFaraday = 96485.33212;   // C/mol
inline constexpr double kGasConstant = 8.314462618;  // J/(mol K)

}  // namespace cellcal
