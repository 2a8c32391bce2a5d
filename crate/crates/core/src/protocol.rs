//! CXL.mem message types and the annotation bits carried in the reserved
//! field of request and no-data-response messages.
//!
//! Layout of the 10-bit reserved field:
//!
//! ```text
//!  9               4 3   2 1   0
//! +-----------------+-----+-----+
//! |    reserved (0) | buf | det |
//! +-----------------+-----+-----+
//! ```
//!
//! `det`: 00 unannotated, 01 DT, 10 ND. `buf`: 00 unannotated, 01 BF, 10 NB.
//! The code 11 is invalid in both sub-fields.

use std::fmt;

use thiserror::Error;

use crate::host::{AccessRecord, MemOp};

/// Width of the reserved field at the tail of every CXL.mem message.
pub const RESERVED_BITS: u32 = 10;
pub const RESERVED_LIMIT: u16 = 1 << RESERVED_BITS;
pub const LINE_BYTES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum Determinism {
    #[default]
    Unannotated,
    Dt,
    Nd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum Bufferability {
    #[default]
    Unannotated,
    Bf,
    Nb,
}

/// Host-level hints attached to a memory request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Annotation {
    pub determinism: Determinism,
    pub bufferability: Bufferability,
}

impl Annotation {
    pub const NONE: Annotation = Annotation {
        determinism: Determinism::Unannotated,
        bufferability: Bufferability::Unannotated,
    };

    pub const fn new(determinism: Determinism, bufferability: Bufferability) -> Self {
        Self {
            determinism,
            bufferability,
        }
    }

    /// All nine representable states, in encoding order.
    pub fn all() -> impl Iterator<Item = Annotation> {
        const DET: [Determinism; 3] = [Determinism::Unannotated, Determinism::Dt, Determinism::Nd];
        const BUF: [Bufferability; 3] = [
            Bufferability::Unannotated,
            Bufferability::Bf,
            Bufferability::Nb,
        ];
        BUF.into_iter()
            .flat_map(|b| DET.into_iter().map(move |d| Annotation::new(d, b)))
    }

    pub fn is_dt(&self) -> bool {
        self.determinism == Determinism::Dt
    }

    pub fn is_bf(&self) -> bool {
        self.bufferability == Bufferability::Bf
    }

    pub fn is_nb(&self) -> bool {
        self.bufferability == Bufferability::Nb
    }

    /// Resolve unannotated sub-fields to a device default.
    pub fn resolve(self, default: Annotation) -> Annotation {
        Annotation {
            determinism: match self.determinism {
                Determinism::Unannotated => default.determinism,
                d => d,
            },
            bufferability: match self.bufferability {
                Bufferability::Unannotated => default.bufferability,
                b => b,
            },
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.determinism {
            Determinism::Unannotated => "-",
            Determinism::Dt => "DT",
            Determinism::Nd => "ND",
        };
        let b = match self.bufferability {
            Bufferability::Unannotated => "-",
            Bufferability::Bf => "BF",
            Bufferability::Nb => "NB",
        };
        write!(f, "{d}/{b}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("reserved field {0:#012b} has bits [9:4] set")]
    ReservedBitsSet(u16),
    #[error("reserved field {0:#012b} carries the invalid code 0b11")]
    InvalidCode(u16),
    #[error("reserved field value {0} does not fit in 10 bits")]
    FieldTooWide(u16),
    #[error("address {0:#x} is not 64-byte aligned")]
    UnalignedAddress(u64),
    #[error("{class} flits cannot carry annotations (reserved = {reserved:#b})")]
    AnnotatedDataFlit { class: FlitClass, reserved: u16 },
    #[error("compute records do not produce memory requests")]
    NotAMemoryOp,
}

pub fn encode_annotation(a: Annotation) -> u16 {
    let det = match a.determinism {
        Determinism::Unannotated => 0b00,
        Determinism::Dt => 0b01,
        Determinism::Nd => 0b10,
    };
    let buf = match a.bufferability {
        Bufferability::Unannotated => 0b00,
        Bufferability::Bf => 0b01,
        Bufferability::Nb => 0b10,
    };
    det | (buf << 2)
}

pub fn decode_annotation(field: u16) -> Result<Annotation, ProtocolError> {
    if field >= RESERVED_LIMIT {
        return Err(ProtocolError::FieldTooWide(field));
    }
    if field >> 4 != 0 {
        return Err(ProtocolError::ReservedBitsSet(field));
    }
    let determinism = match field & 0b11 {
        0b00 => Determinism::Unannotated,
        0b01 => Determinism::Dt,
        0b10 => Determinism::Nd,
        _ => return Err(ProtocolError::InvalidCode(field)),
    };
    let bufferability = match (field >> 2) & 0b11 {
        0b00 => Bufferability::Unannotated,
        0b01 => Bufferability::Bf,
        0b10 => Bufferability::Nb,
        _ => return Err(ProtocolError::InvalidCode(field)),
    };
    Ok(Annotation {
        determinism,
        bufferability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlitClass {
    M2SReq,
    M2SRwD,
    S2MNdr,
    S2MDrs,
}

impl FlitClass {
    pub fn payload_bytes(self) -> u32 {
        match self {
            FlitClass::M2SRwD | FlitClass::S2MDrs => LINE_BYTES as u32,
            FlitClass::M2SReq | FlitClass::S2MNdr => 0,
        }
    }

    /// Only request and no-data-response messages carry annotation bits.
    pub fn carries_annotation(self) -> bool {
        matches!(self, FlitClass::M2SReq | FlitClass::S2MNdr)
    }

    pub fn is_m2s(self) -> bool {
        matches!(self, FlitClass::M2SReq | FlitClass::M2SRwD)
    }
}

impl fmt::Display for FlitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlitClass::M2SReq => "M2SReq",
            FlitClass::M2SRwD => "M2SRwD",
            FlitClass::S2MNdr => "S2MNDR",
            FlitClass::S2MDrs => "S2MDRS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opcode {
    MemRd,
    MemWr,
    MemRdData,
    Cmp,
    /// Global persistent flush, delivered in-band so it stays ordered behind
    /// outstanding writes.
    Gpf,
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Opcode::MemRd => "MemRd",
            Opcode::MemWr => "MemWr",
            Opcode::MemRdData => "MemRdData",
            Opcode::Cmp => "Cmp",
            Opcode::Gpf => "GPF",
        })
    }
}

/// A single CXL.mem message. Constructed only through [`Flit::new`], which
/// enforces the class/payload/reserved invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flit {
    class: FlitClass,
    opcode: Opcode,
    address: u64,
    tag: u16,
    reserved: u16,
}

impl Flit {
    pub fn new(
        class: FlitClass,
        opcode: Opcode,
        address: u64,
        tag: u16,
        reserved: u16,
    ) -> Result<Self, ProtocolError> {
        if !address.is_multiple_of(LINE_BYTES) {
            return Err(ProtocolError::UnalignedAddress(address));
        }
        if reserved >= RESERVED_LIMIT {
            return Err(ProtocolError::FieldTooWide(reserved));
        }
        if !class.carries_annotation() && reserved != 0 {
            return Err(ProtocolError::AnnotatedDataFlit { class, reserved });
        }
        Ok(Self {
            class,
            opcode,
            address,
            tag,
            reserved,
        })
    }

    pub fn class(&self) -> FlitClass {
        self.class
    }

    pub fn opcode(&self) -> Opcode {
        self.opcode
    }

    pub fn address(&self) -> u64 {
        self.address
    }

    pub fn tag(&self) -> u16 {
        self.tag
    }

    pub fn reserved(&self) -> u16 {
        self.reserved
    }

    pub fn payload_bytes(&self) -> u32 {
        self.class.payload_bytes()
    }

    pub fn annotation(&self) -> Result<Annotation, ProtocolError> {
        decode_annotation(self.reserved)
    }

    /// Response to this request. Data responses never carry annotations; the
    /// NDR echoes the request's reserved field.
    pub fn response(&self) -> Flit {
        let (class, opcode, reserved) = match self.opcode {
            Opcode::MemRd => (FlitClass::S2MDrs, Opcode::MemRdData, 0),
            _ => (FlitClass::S2MNdr, Opcode::Cmp, self.reserved),
        };
        Flit {
            class,
            opcode,
            address: self.address,
            tag: self.tag,
            reserved,
        }
    }
}

impl fmt::Display for Flit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} addr={:#x} tag={} resv=0b{:010b}",
            self.class, self.opcode, self.address, self.tag, self.reserved
        )
    }
}

/// Messages for one host access: the request, plus the data flit for stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub req: Flit,
    pub data: Option<Flit>,
}

impl Request {
    pub fn flits(&self) -> impl Iterator<Item = Flit> + '_ {
        std::iter::once(self.req).chain(self.data)
    }

    pub fn wire_bytes(&self) -> u32 {
        self.flits().map(|f| f.payload_bytes()).sum()
    }
}

pub fn build_request(
    record: &AccessRecord,
    a: Annotation,
    tag: u16,
) -> Result<Request, ProtocolError> {
    if !record.address.is_multiple_of(LINE_BYTES) {
        return Err(ProtocolError::UnalignedAddress(record.address));
    }
    let resv = encode_annotation(a);
    match record.op {
        MemOp::Load => Ok(Request {
            req: Flit::new(FlitClass::M2SReq, Opcode::MemRd, record.address, tag, resv)?,
            data: None,
        }),
        MemOp::Store => Ok(Request {
            req: Flit::new(FlitClass::M2SReq, Opcode::MemWr, record.address, tag, resv)?,
            data: Some(Flit::new(
                FlitClass::M2SRwD,
                Opcode::MemWr,
                record.address,
                tag,
                0,
            )?),
        }),
        MemOp::Compute => Err(ProtocolError::NotAMemoryOp),
    }
}

pub fn gpf_request(tag: u16) -> Flit {
    Flit {
        class: FlitClass::M2SReq,
        opcode: Opcode::Gpf,
        address: 0,
        tag,
        reserved: 0,
    }
}
