//! Genesis files: the initial stake, key, and role registry.
//!
//! One record per node — address, public key, stake, role — in both the
//! canonical binary encoding and a line-oriented text form:
//!
//! ```text
//! # vaultchain genesis
//! balance 1000000000
//! <address-hex> <pubkey-hex> <stake> validator|client
//! ```

use thiserror::Error;

use crate::codec::{self, CodecError, Decode, Encode, Reader};
use crate::ledger::WorldState;
use crate::membership::StakeLedger;
use crate::types::{Address, PublicKey};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeRole {
    Validator,
    Client,
}

impl NodeRole {
    fn as_str(&self) -> &'static str {
        match self {
            NodeRole::Validator => "validator",
            NodeRole::Client => "client",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GenesisRecord {
    pub address: Address,
    pub public_key: PublicKey,
    pub stake: u64,
    pub role: NodeRole,
}

/// Complete genesis description: per-node records plus the uniform opening
/// balance credited to every account.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GenesisSpec {
    pub initial_balance: u64,
    pub records: Vec<GenesisRecord>,
}

#[derive(Debug, Error)]
pub enum GenesisError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("record {0}: address does not match public key")]
    AddressMismatch(usize),
    #[error("binary genesis: {0}")]
    Codec(#[from] CodecError),
}

impl GenesisSpec {
    /// Stake ledger over the validator records.
    pub fn stake_ledger(&self) -> StakeLedger {
        let mut ledger = StakeLedger::new();
        for record in &self.records {
            ledger.register(record.public_key, record.stake);
        }
        ledger
    }

    /// Opening world state: every record's account funded with the initial
    /// balance.
    pub fn world_state(&self) -> WorldState {
        let mut state = WorldState::new();
        for record in &self.records {
            state.credit_account(record.public_key, self.initial_balance);
        }
        state
    }

    pub fn validator_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.role == NodeRole::Validator)
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# vaultchain genesis\n");
        out.push_str(&format!("balance {}\n", self.initial_balance));
        for r in &self.records {
            out.push_str(&format!(
                "{} {} {} {}\n",
                r.address.to_hex(),
                r.public_key.to_hex(),
                r.stake,
                r.role.as_str()
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<GenesisSpec, GenesisError> {
        let mut initial_balance = None;
        let mut records = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("balance ") {
                initial_balance = Some(rest.trim().parse::<u64>().map_err(|e| {
                    GenesisError::Parse(lineno + 1, format!("bad balance: {e}"))
                })?);
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(GenesisError::Parse(
                    lineno + 1,
                    format!("expected 4 fields, got {}", fields.len()),
                ));
            }
            let address = Address::from_hex(fields[0])
                .ok_or_else(|| GenesisError::Parse(lineno + 1, "bad address hex".into()))?;
            let public_key = PublicKey::from_hex(fields[1])
                .ok_or_else(|| GenesisError::Parse(lineno + 1, "bad public key hex".into()))?;
            let stake = fields[2]
                .parse::<u64>()
                .map_err(|e| GenesisError::Parse(lineno + 1, format!("bad stake: {e}")))?;
            let role = match fields[3] {
                "validator" => NodeRole::Validator,
                "client" => NodeRole::Client,
                other => {
                    return Err(GenesisError::Parse(
                        lineno + 1,
                        format!("unknown role `{other}`"),
                    ))
                }
            };
            records.push(GenesisRecord {
                address,
                public_key,
                stake,
                role,
            });
        }
        let spec = GenesisSpec {
            initial_balance: initial_balance
                .ok_or_else(|| GenesisError::Parse(0, "missing `balance` line".into()))?,
            records,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        self.encode()
    }

    pub fn from_binary(bytes: &[u8]) -> Result<GenesisSpec, GenesisError> {
        let spec = GenesisSpec::decode(bytes)?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), GenesisError> {
        for (i, r) in self.records.iter().enumerate() {
            if Address::from_public_key(&r.public_key) != r.address {
                return Err(GenesisError::AddressMismatch(i));
            }
        }
        Ok(())
    }
}

impl Encode for GenesisRecord {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.address.encode_into(out);
        self.public_key.encode_into(out);
        codec::put_u64(out, self.stake);
        out.push(match self.role {
            NodeRole::Validator => 0,
            NodeRole::Client => 1,
        });
    }
}

impl Decode for GenesisRecord {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(GenesisRecord {
            address: Address::decode_from(r)?,
            public_key: PublicKey::decode_from(r)?,
            stake: r.u64_be()?,
            role: match r.u8()? {
                0 => NodeRole::Validator,
                1 => NodeRole::Client,
                tag => return Err(CodecError::InvalidTag { what: "node role", tag }),
            },
        })
    }
}

impl Encode for GenesisSpec {
    fn encode_into(&self, out: &mut Vec<u8>) {
        codec::put_u64(out, self.initial_balance);
        self.records.encode_into(out);
    }
}

impl Decode for GenesisSpec {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(GenesisSpec {
            initial_balance: r.u64_be()?,
            records: Vec::decode_from(r)?,
        })
    }
}
