#ifndef DCERT_DCERT_HPP
#define DCERT_DCERT_HPP

#include "dcert/alias.hpp"
#include "dcert/certify.hpp"
#include "dcert/corpus.hpp"
#include "dcert/dataflow.hpp"
#include "dcert/errors.hpp"
#include "dcert/graphs.hpp"
#include "dcert/ir.hpp"

#endif
