#pragma once

// Source text for a schedule: the forall/where IR, or a C function with one
// loop per iteration-graph loop, walking the sparse input through its CSF
// position and coordinate arrays.

#include <string>

#include "bigsched/igraph.hpp"

namespace bigsched {

enum class EmitFormat { Pseudo, C };

/// `pseudo` or `c`.
EmitFormat parse_emit_format(const std::string& text);

std::string emit_pseudo(const Schedule& s);

/// `void <name>(...)`: bounds as ints in expression index order, then every
/// input (a sparse one as `B1_pos, B1_crd, ..., B_vals`), then the output,
/// which must be zero on entry. Tensors are row-major.
std::string emit_c(const Schedule& s, const std::string& name = "kernel");

std::string emit(const Schedule& s, EmitFormat format);

}  // namespace bigsched
