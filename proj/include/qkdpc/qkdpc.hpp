#pragma once

#include "qkdpc/errors.hpp"
#include "qkdpc/hermitian.hpp"
#include "qkdpc/hvec.hpp"
#include "qkdpc/protocol.hpp"
#include "qkdpc/channel.hpp"
#include "qkdpc/gram.hpp"
#include "qkdpc/problem.hpp"
#include "qkdpc/solver.hpp"
#include "qkdpc/verify.hpp"
#include "qkdpc/keyrate.hpp"
