#pragma once

#include "abbo/acquisition.hpp"
#include "abbo/campaign.hpp"
#include "abbo/config.hpp"
#include "abbo/error.hpp"
#include "abbo/features.hpp"
#include "abbo/gp.hpp"
#include "abbo/hashing.hpp"
#include "abbo/io.hpp"
#include "abbo/kernels.hpp"
#include "abbo/methods.hpp"
#include "abbo/nsga2.hpp"
#include "abbo/oracle.hpp"
#include "abbo/plm.hpp"
#include "abbo/report.hpp"
#include "abbo/seqcore.hpp"
