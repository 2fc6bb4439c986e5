//! Model text for one configuration.

use super::{Config, DeviationSet};
use std::fmt::Write;

/// MO id of the office holding voter `v` in the initial register.
pub fn home_office(cfg: &Config, v: u32) -> i32 {
    -1 - ((v - 1) % cfg.nmo) as i32
}

/// EC id of the commission listing voter `v`.
pub fn home_commission(cfg: &Config, v: u32) -> i32 {
    -(cfg.nmo as i32) - 1 - ((v - 1) % cfg.nec) as i32
}

pub(crate) fn model_text(cfg: &Config, dev: &DeviationSet) -> String {
    let mut t = String::new();
    let b = |x: bool| if x { "true" } else { "false" };
    let (fixed_mo, fixed_cand) = match dev.mo_fixed_strategy {
        Some(f) => (f.office, f.cand as i32),
        None => (0, 0),
    };
    writeln!(
        t,
        "const int NV = {};\nconst int NMO = {};\nconst int NEC = {};\nconst int NC = {};\n",
        cfg.nv, cfg.nmo, cfg.nec, cfg.nc
    )
    .unwrap();
    writeln!(t, "// Deviations. Each switch only enables additional edges.").unwrap();
    writeln!(t, "const bool DEV_WRONG_RECIPIENT = {};", b(dev.voter_wrong_recipient)).unwrap();
    writeln!(t, "const bool DEV_UNSEALED = {};", b(dev.envelope_unsealed)).unwrap();
    writeln!(t, "const bool DEV_MARK = {};", b(dev.mark_misplaced)).unwrap();
    writeln!(t, "const bool DEV_CARD = {};", b(dev.card_unfilled_or_unsigned)).unwrap();
    writeln!(t, "const bool DEV_CERT = {};", b(dev.vote_after_certificate)).unwrap();
    writeln!(t, "const bool DEV_MO_STAMP = {};", b(dev.mo_invalid_stamp)).unwrap();
    writeln!(t, "// Office with a fixed stamping strategy against FIXED_CAND, 0 for none.").unwrap();
    writeln!(t, "const int FIXED_MO = {fixed_mo};\nconst int FIXED_CAND = {fixed_cand};").unwrap();
    writeln!(t, "// Voter whose deviation edges are removed, 0 for none.").unwrap();
    writeln!(t, "const int HONEST = {};\n", dev.honest_voter.unwrap_or(0)).unwrap();
    t.push_str(TYPES);
    let rows: Vec<String> = (1..=cfg.nv)
        .map(|v| format!("{{{}, {}, NONE, false}}", home_office(cfg, v), home_commission(cfg, v)))
        .collect();
    writeln!(t, "v_record vlist[v_t] = {{{}}};\n", rows.join(", ")).unwrap();
    t.push_str(BODY);
    t
}

const TYPES: &str = r#"typedef int[1,NC] c_t;
typedef int[0,NC] c_tx;
typedef int[1,NV] v_t;
typedef int[0,NV] v_tx;
typedef int[-NMO,-1] mo_t;
typedef int[-NMO-NEC,-NMO-1] ec_t;
typedef int[0,0] nobody_t;
typedef int[-NMO-NEC,NV] addr_t;
partition addr_t = ec_t | mo_t | nobody_t | v_t;

typedef enum { NONE, CERT_ISSUED, INTENT_RECEIVED, EP_PREPARED, EP_SENT, EP_COLLECTED, VOTE_RECEIVED } cmt_t;

typedef struct {
    addr_t src;
    addr_t dst;
    addr_t addr;
    bool inperson;
    v_tx pesel_of;
} IntentionForm;

typedef struct {
    bool sealed;
    bool pkw_stamp;
    bool dec_stamp;
    int[0,2] cell[c_t];
} Benv;

typedef struct {
    addr_t src;
    addr_t dst;
    Benv benv;
    addr_t stamp;
    bool sealed;
    bool dec_signature;
    v_tx dec_pesel;
} Renv;

typedef struct {
    addr_t src;
    addr_t dst;
    Renv renv;
} ElectionPackage;

typedef struct {
    addr_t mo_addr;
    addr_t ec_addr;
    cmt_t comment;
    bool changed;
} v_record;

"#;

const BODY: &str = r#"// Forms and envelopes in transit. The receiver clears them.
IntentionForm iform;
v_tx courier;

// The package each voter holds, and who holds its return envelope.
ElectionPackage ep[v_t];
addr_t renv_at[v_t];
bool in_box[v_t];

// Instrumentation.
int[0,NV] b_recv;
int[0,NV] ep_sent;
c_tx recorded_link[v_t];
c_tx vpref[v_t];

chan intent[mo_t];
chan change_req[mo_t];
chan cert_req[mo_t];
chan renv_post[mo_t];
chan ep_deliver[v_t];
chan renv_hand[ec_t];
chan prot_accept[ec_t];
chan prot_reject[ec_t];

// Office supervising commission e.
mo_t ec_office(ec_t e) {
    return -1 - (-e - NMO - 1) % NMO;
}

bool exactly_one_mark(v_t v) {
    return (sum (c : c_t) ep[v].renv.benv.cell[c]) == 1;
}

c_tx marked(v_t v) {
    return sum (c : c_t) (ep[v].renv.benv.cell[c] == 1 ? c : 0);
}

bool ballot_valid(v_t v) {
    return ep[v].renv.benv.sealed && ep[v].renv.benv.pkw_stamp && ep[v].renv.benv.dec_stamp && exactly_one_mark(v);
}

process Voter(const v_t id) {
    c_t pref_cand;

    bool may_deviate() {
        return id != HONEST;
    }

    void fill(c_tx x, int[1,2] n, bool sb, bool sr, bool sig, bool pes, addr_t to) {
        if (x > 0) ep[id].renv.benv.cell[x] = n;
        ep[id].renv.benv.sealed = sb;
        ep[id].renv.src = id;
        ep[id].renv.dst = to;
        ep[id].renv.sealed = sr;
        ep[id].renv.dec_signature = sig;
        ep[id].renv.dec_pesel = pes ? id : 0;
    }

    state start, idle, intent_sent, has_ep, filled, sent_renv, passed_renv;
    commit start;
    init start;
    trans
        start -> idle { select c : c_t; assign pref_cand = c, vpref[id] = c; },
        idle -> idle {
            select k : mo_t;
            guard Time.registration && !vlist[id].changed && k != vlist[id].mo_addr;
            sync change_req[k]!;
            assign courier = id;
        },
        idle -> intent_sent {
            select k : mo_t;
            guard Time.registration && (k == vlist[id].mo_addr || DEV_WRONG_RECIPIENT && may_deviate());
            sync intent[k]!;
            assign iform.src = id, iform.dst = k, iform.addr = id, iform.inperson = false, iform.pesel_of = id;
        },
        intent_sent -> has_ep { sync ep_deliver[id]?; },
        has_ep -> has_ep {
            select k : mo_t;
            guard DEV_CERT && may_deviate() && (Time.ep_window || Time.casting)
                && k == vlist[id].mo_addr && vlist[id].comment != CERT_ISSUED;
            sync cert_req[k]!;
            assign courier = id;
        },
        has_ep -> filled {
            guard Time.casting;
            assign fill(pref_cand, 1, true, true, true, true, vlist[id].ec_addr);
        },
        has_ep -> filled {
            select x : c_tx, n : int[1,2];
            guard Time.casting && DEV_MARK && may_deviate()
                && (x == 0 && n == 1 || x > 0 && x != pref_cand && n == 1 || x == pref_cand && n == 2);
            assign fill(x, n, true, true, true, true, vlist[id].ec_addr);
        },
        has_ep -> filled {
            select sb : bool, sr : bool;
            guard Time.casting && DEV_UNSEALED && may_deviate() && !(sb && sr);
            assign fill(pref_cand, 1, sb, sr, true, true, vlist[id].ec_addr);
        },
        has_ep -> filled {
            select sig : bool, pes : bool;
            guard Time.casting && DEV_CARD && may_deviate() && !(sig && pes);
            assign fill(pref_cand, 1, true, true, sig, pes, vlist[id].ec_addr);
        },
        has_ep -> filled {
            select e : ec_t;
            guard Time.casting && DEV_WRONG_RECIPIENT && may_deviate() && e != vlist[id].ec_addr;
            assign fill(pref_cand, 1, true, true, true, true, e);
        },
        filled -> sent_renv {
            select k : mo_t;
            guard Time.casting && (k == vlist[id].mo_addr || DEV_WRONG_RECIPIENT && may_deviate());
            sync renv_post[k]!;
            assign courier = id;
        },
        filled -> passed_renv {
            select e : ec_t;
            guard (Time.casting || Time.eday) && (e == vlist[id].ec_addr || DEV_WRONG_RECIPIENT && may_deviate());
            sync renv_hand[e]!;
            assign courier = id;
        };
}

process MO(const mo_t id) {
    void register_intent() {
        if (vlist[iform.pesel_of].mo_addr == id && vlist[iform.pesel_of].comment == NONE)
            vlist[iform.pesel_of].comment = INTENT_RECEIVED;
        iform.src = 0;
        iform.dst = 0;
        iform.addr = 0;
        iform.pesel_of = 0;
    }

    bool stamp_allowed(v_t v, bool valid) {
        if (id == FIXED_MO) return valid == (vpref[v] != FIXED_CAND);
        return valid || DEV_MO_STAMP;
    }

    void prepare(v_t v, bool valid) {
        ep[v].src = id;
        ep[v].dst = v;
        ep[v].renv.benv.pkw_stamp = valid;
        ep[v].renv.benv.dec_stamp = true;
        vlist[v].comment = EP_SENT;
        ep_sent++;
    }

    state office;
    init office;
    trans
        office -> office {
            sync change_req[id]?;
            assign vlist[courier].mo_addr = id, vlist[courier].changed = true, courier = 0;
        },
        office -> office { sync intent[id]?; assign register_intent(); },
        office -> office {
            select v : v_t, valid : bool;
            guard Time.ep_window && vlist[v].mo_addr == id && vlist[v].comment == INTENT_RECEIVED
                && stamp_allowed(v, valid);
            sync ep_deliver[v]!;
            assign prepare(v, valid);
        },
        office -> office {
            sync cert_req[id]?;
            assign vlist[courier].comment = CERT_ISSUED, courier = 0;
        },
        office -> office {
            sync renv_post[id]?;
            assign renv_at[courier] = id, ep[courier].renv.stamp = id, courier = 0;
        },
        office -> office {
            select v : v_t, e : ec_t;
            guard Time.eday && renv_at[v] == id && ep[v].renv.dst == e;
            sync renv_hand[e]!;
            assign courier = v;
        },
        office -> office {
            select e : ec_t;
            guard EC(e).reported && ec_office(e) == id;
            sync prot_accept[e]!;
        },
        office -> office {
            select e : ec_t;
            guard EC(e).reported && ec_office(e) == id && id != FIXED_MO;
            sync prot_reject[e]!;
        };
}

process EC(const ec_t id) {
    // Validation against the printed voters' list.
    void receive(v_t v) {
        renv_at[v] = id;
        if (vlist[v].ec_addr == id && vlist[v].comment == EP_SENT && ep[v].renv.sealed
                && ep[v].renv.dec_signature && ep[v].renv.dec_pesel == v) {
            vlist[v].comment = VOTE_RECEIVED;
            in_box[v] = true;
            b_recv++;
        }
    }

    void tally() {
        for (v : v_t)
            if (in_box[v] && renv_at[v] == id)
                recorded_link[v] = ballot_valid(v) ? marked(v) : 0;
    }

    state waiting, open, counted, reported, done;
    commit counted;
    init waiting;
    trans
        waiting -> open { guard Time.eday; },
        open -> open { sync renv_hand[id]?; assign receive(courier), courier = 0; },
        open -> counted {
            guard forall (v : v_t) !(renv_at[v] < 0 && renv_at[v] >= -NMO && ep[v].renv.dst == id);
            assign tally();
        },
        counted -> reported {},
        reported -> done { sync prot_accept[id]?; },
        reported -> counted { sync prot_reject[id]?; assign tally(); };
}

process Time {
    state registration, ep_window, casting, eday, end;
    init registration;
    trans
        registration -> ep_window {},
        ep_window -> casting {},
        casting -> eday {},
        eday -> end { guard forall (e : ec_t) EC(e).done; };
}

system Voter, MO, EC, Time;
"#;
