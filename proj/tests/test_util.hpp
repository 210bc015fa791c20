#pragma once

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>

#define REQUIRE(cond, msg)                                                       \
    do {                                                                         \
        if (!(cond)) {                                                           \
            std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << " " << msg \
                      << "\n";                                                   \
            std::exit(1);                                                        \
        }                                                                        \
    } while (0)

#define REQUIRE_CLOSE(a, b, tol, msg)                                                            \
    REQUIRE(std::fabs((a) - (b)) <= (tol),                                                       \
            msg << " (got " << (a) << ", want " << (b) << ", tol " << (tol) << ")")

#define REQUIRE_THROWS(expr, ExceptionType, msg)            \
    do {                                                    \
        bool caught_ = false;                               \
        try {                                               \
            (void)(expr);                                   \
        } catch (const ExceptionType&) {                    \
            caught_ = true;                                 \
        }                                                   \
        REQUIRE(caught_, msg);                              \
    } while (0)

inline void pass(const std::string& name) { std::cout << "[PASS] " << name << "\n"; }
