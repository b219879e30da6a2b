#pragma once

namespace sqz::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// SI values (2019 redefinition; h is exact)
inline constexpr double planck_h = 6.62607015e-34;       // J s
inline constexpr double hbar = planck_h / two_pi;        // J s
inline constexpr double speed_of_light = 299792458.0;    // m/s
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m

}  // namespace sqz::constants
