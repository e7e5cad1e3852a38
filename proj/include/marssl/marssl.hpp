#pragma once

#include "marssl/common.hpp"
#include "marssl/datagen.hpp"
#include "marssl/density.hpp"
#include "marssl/dimred.hpp"
#include "marssl/eval.hpp"
#include "marssl/io.hpp"
#include "marssl/partition.hpp"
#include "marssl/ssl.hpp"
