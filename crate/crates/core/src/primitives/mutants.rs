//! Planted faults. Diff mutants change one token of a corpus program and
//! must be caught by differential testing; leak mutants add a
//! secret-dependent branch, address or index and must be caught by the
//! constant-time checks.

use super::corpus::program_source;
use super::PrimError;

/// One-token replacement in a corpus program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffMutant {
    pub name: &'static str,
    pub program: &'static str,
    /// Text around the token, unique in the program.
    pub context: &'static str,
    pub from: &'static str,
    pub to: &'static str,
}

pub const DIFF_MUTANTS: &[DiffMutant] = &[
    DiffMutant {
        name: "chacha_scalar_rot16",
        program: "chacha20_scalar",
        context: "x[d] = x[d] <<r 16;",
        from: "16",
        to: "15",
    },
    DiffMutant {
        name: "chacha_scalar_rot7",
        program: "chacha20_scalar",
        context: "x[b] = x[b] <<r 7;",
        from: "7",
        to: "9",
    },
    DiffMutant {
        name: "chacha_scalar_diagonal",
        program: "chacha20_scalar",
        context: "x = qr(x, 1, 6, 11, 12);",
        from: "11",
        to: "10",
    },
    DiffMutant {
        name: "chacha_small_perm_imm",
        program: "chacha20_avx2_small",
        context: "o[0] = #x86_VPERM2I128(k[0], k[1], 0x20);",
        from: "0x20",
        to: "0x31",
    },
    DiffMutant {
        name: "chacha_small_rot12",
        program: "chacha20_avx2_small",
        context: "k[1] = rol(k[1], 12);",
        from: "12",
        to: "11",
    },
    DiffMutant {
        name: "chacha_small_shuffle_imm",
        program: "chacha20_avx2_small",
        context: "k[2] = #x86_VPSHUFD_256(k[2], (4u2)[ 1, 0, 3, 2]);\n    k[3] = #x86_VPSHUFD_256(k[3], (4u2)[ 2, 1, 0, 3]);\n    return k;\n}\n\ninline fn reverse",
        from: "2, 1, 0, 3",
        to: "0, 1, 2, 3",
    },
    DiffMutant {
        name: "chacha_big_unpack",
        program: "chacha20_avx2_big",
        context: "b[1] = #x86_VPUNPCKH_4u64(a[0], a[2]);",
        from: "VPUNPCKH_4u64",
        to: "VPUNPCKL_4u64",
    },
    DiffMutant {
        name: "chacha_big_lane_counter",
        program: "chacha20_avx2_big",
        context: "(8u32)[7, 6, 5, 4, 3, 2, 1, 0]",
        from: "7",
        to: "8",
    },
    DiffMutant {
        name: "poly_ref_fold",
        program: "poly1305_ref",
        context: "d2 &= 3;\n    c = c * 5;",
        from: "5",
        to: "4",
    },
    DiffMutant {
        name: "poly_ref_clamp",
        program: "poly1305_ref",
        context: "r1 &= 0x0ffffffc0ffffffc;",
        from: "0x0ffffffc0ffffffc",
        to: "0x0ffffffc0fffffff",
    },
    DiffMutant {
        name: "poly_ref_padding",
        program: "poly1305_ref",
        context: "buf.[j] = 1;",
        from: "1",
        to: "2",
    },
    DiffMutant {
        name: "poly_avx2_permq_imm",
        program: "poly1305_avx2",
        context: "hi = #x86_VPERMQ(hi, 0xD8);",
        from: "0xD8",
        to: "0xE4",
    },
    DiffMutant {
        name: "poly_avx2_times5",
        program: "poly1305_avx2",
        context: "t = l4[x] << 2;",
        from: "2",
        to: "3",
    },
    DiffMutant {
        name: "poly_avx2_radix",
        program: "poly1305_avx2",
        context: "t = hi >>4u64 14;",
        from: "14",
        to: "13",
    },
    DiffMutant {
        name: "gimli_ref_rot24",
        program: "gimli_ref",
        context: "x = s[j] <<r 24;",
        from: "24",
        to: "23",
    },
    DiffMutant {
        name: "gimli_ref_constant",
        program: "gimli_ref",
        context: "s[0] ^= 0x9e377900 ^ round;",
        from: "0x9e377900",
        to: "0x9e377901",
    },
    DiffMutant {
        name: "gimli_sse_swap_imm",
        program: "gimli_sse",
        context: "r0 = #x86_VPSHUFD_128(r0, 0xB1);",
        from: "0xB1",
        to: "0x4E",
    },
    DiffMutant {
        name: "gimli_sse_rot9",
        program: "gimli_sse",
        context: "y = r1 <<4u32 9;",
        from: "9",
        to: "8",
    },
];

fn replace_unique(src: &str, context: &str, with: &str, what: &str) -> Result<String, PrimError> {
    if src.matches(context).count() != 1 {
        return Err(PrimError::Corpus {
            name: what.into(),
            err: crate::ir::IrError::Parse(crate::ir::ParseError {
                loc: Default::default(),
                msg: format!("mutation site `{context}` is not unique"),
            }),
        });
    }
    Ok(src.replacen(context, with, 1))
}

impl DiffMutant {
    pub fn source(&self) -> Result<String, PrimError> {
        let src = program_source(self.program)?;
        let at = self
            .context
            .find(self.from)
            .expect("token inside its context");
        let mut ctx = self.context.to_string();
        ctx.replace_range(at..at + self.from.len(), self.to);
        replace_unique(&src, self.context, &ctx, self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakKind {
    Branch,
    Address,
    Index,
}

/// Statements inserted right after `anchor` in a corpus program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeakMutant {
    pub name: &'static str,
    pub program: &'static str,
    pub kind: LeakKind,
    pub anchor: &'static str,
    pub insert: &'static str,
}

pub const LEAK_MUTANTS: &[LeakMutant] = &[
    LeakMutant {
        name: "poly_ref_branch_on_accumulator",
        program: "poly1305_ref",
        kind: LeakKind::Branch,
        anchor: "h0, h1, h2 = mulmod(h0, h1, h2, r0, r1);\n",
        insert: "        if (h0 & 1) == 1 { j = 0; }\n",
    },
    LeakMutant {
        name: "poly_ref_key_address",
        program: "poly1305_ref",
        kind: LeakKind::Address,
        anchor: "r1 &= 0x0ffffffc0ffffffc;\n",
        insert: "    j = r0 & 8;\n    b = (u8)[k + j];\n",
    },
    LeakMutant {
        name: "poly_avx2_key_index",
        program: "poly1305_avx2",
        kind: LeakKind::Index,
        anchor: "r1 &= 0x0ffffffc0ffffffc;\n",
        insert: "    j = r1 & 15;\n    buf.[j] = 0;\n",
    },
    LeakMutant {
        name: "chacha_scalar_key_index",
        program: "chacha20_scalar",
        kind: LeakKind::Index,
        anchor: "st = init(key, nonce, counter);\n",
        insert: "    j = (64u)st[4];\n    j &= 15;\n    ks[j] = 0;\n",
    },
    LeakMutant {
        name: "chacha_small_plain_branch",
        program: "chacha20_avx2_small",
        kind: LeakKind::Branch,
        anchor: "o = blocks2(st);\n        for w = 0 to 3 {\n            t = (u256)[plain + i + 32 * w];\n",
        insert: "            if (t & 1) == 1 { j = 0; }\n",
    },
    LeakMutant {
        name: "chacha_big_nonce_address",
        program: "chacha20_avx2_big",
        kind: LeakKind::Address,
        anchor: "c = counter;\n",
        insert: "    i = (64u)st8[13];\n    i &= 7;\n    w = (u32)[nonce + i];\n",
    },
    LeakMutant {
        name: "gimli_ref_state_branch",
        program: "gimli_ref",
        kind: LeakKind::Branch,
        anchor: "round -= 1;\n",
        insert: "        if (s[5] & 1) == 0 { x = 0; }\n",
    },
    LeakMutant {
        name: "gimli_sse_state_address",
        program: "gimli_sse",
        kind: LeakKind::Address,
        anchor: "r2 = (u128)[state + 32];\n",
        insert: "    round = (u32)[state + 4];\n    round &= 12;\n    t = (u128)[state + (64u)round];\n",
    },
    LeakMutant {
        name: "store2_secret_address",
        program: "store2",
        kind: LeakKind::Address,
        anchor: "[p + 8] = x[1];\n",
        insert: "    [p + (x[0] & 8)] = x[1];\n",
    },
    LeakMutant {
        name: "memcpy_data_branch",
        program: "memcpy",
        kind: LeakKind::Branch,
        anchor: "t = (u8)[src + i];\n",
        insert: "        if t == 0 { t = 0; }\n",
    },
];

impl LeakMutant {
    pub fn source(&self) -> Result<String, PrimError> {
        let src = program_source(self.program)?;
        replace_unique(
            &src,
            self.anchor,
            &format!("{}{}", self.anchor, self.insert),
            self.name,
        )
    }
}
