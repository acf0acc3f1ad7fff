use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Device organization. Every count must be a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub banks_per_rank: u32,
    pub rows_per_bank: u32,
    pub cols_per_row: u32,
    pub bytes_per_column: u32,
}

impl Default for Geometry {
    /// One 2 GB rank of eight banks.
    fn default() -> Self {
        Self {
            channels: 1,
            ranks_per_channel: 1,
            banks_per_rank: 8,
            rows_per_bank: 1 << 15,
            cols_per_row: 1 << 10,
            bytes_per_column: 8,
        }
    }
}

/// A bank inside one channel's floorplan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BankId {
    pub rank: u32,
    pub bank: u32,
}

impl BankId {
    pub fn new(rank: u32, bank: u32) -> Self {
        Self { rank, bank }
    }
}

impl fmt::Display for BankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}b{}", self.rank, self.bank)
    }
}

/// A physical address split into its coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DecodedAddress {
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub row: u32,
    pub column: u32,
}

impl DecodedAddress {
    pub fn new(channel: u32, rank: u32, bank: u32, row: u32, column: u32) -> Self {
        Self {
            channel,
            rank,
            bank,
            row,
            column,
        }
    }

    pub fn bank_id(&self) -> BankId {
        BankId::new(self.rank, self.bank)
    }
}

impl fmt::Display for DecodedAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(ch {}, ra {}, ba {}, ro {}, co {})",
            self.channel, self.rank, self.bank, self.row, self.column
        )
    }
}

fn log2(x: u32) -> u32 {
    x.trailing_zeros()
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("channels", self.channels),
            ("ranks_per_channel", self.ranks_per_channel),
            ("banks_per_rank", self.banks_per_rank),
            ("rows_per_bank", self.rows_per_bank),
            ("cols_per_row", self.cols_per_row),
            ("bytes_per_column", self.bytes_per_column),
        ];
        for (name, v) in fields {
            if v == 0 || !v.is_power_of_two() {
                return Err(Error::InvalidParameter(format!(
                    "geometry.{name} = {v} is not a power of two"
                )));
            }
        }
        if self.address_bits() > 63 {
            return Err(Error::InvalidParameter("geometry exceeds 63 address bits".into()));
        }
        Ok(())
    }

    /// Checks that slot keys fit the 32-bit trie key.
    pub fn validate_key_width(&self) -> Result<()> {
        if self.key_bits() > 32 {
            return Err(Error::InvalidParameter(format!(
                "geometry needs {} key bits; the translation trie holds 32",
                self.key_bits()
            )));
        }
        Ok(())
    }

    pub fn banks_per_channel(&self) -> u32 {
        self.ranks_per_channel * self.banks_per_rank
    }

    pub fn total_banks(&self) -> usize {
        (self.channels * self.banks_per_channel()) as usize
    }

    pub fn total_ranks(&self) -> usize {
        (self.channels * self.ranks_per_channel) as usize
    }

    /// Column slots per bank.
    pub fn slots_per_bank(&self) -> u64 {
        self.rows_per_bank as u64 * self.cols_per_row as u64
    }

    pub fn row_bytes(&self) -> u64 {
        self.cols_per_row as u64 * self.bytes_per_column as u64
    }

    /// Distance in bytes between the first addresses of consecutive banks.
    pub fn bank_stride(&self) -> u64 {
        self.row_bytes()
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.total_banks() as u64 * self.slots_per_bank() * self.bytes_per_column as u64
    }

    pub fn cells_per_row(&self) -> u64 {
        self.row_bytes() * 8
    }

    fn offset_bits(&self) -> u32 {
        log2(self.bytes_per_column)
    }

    fn column_bits(&self) -> u32 {
        log2(self.cols_per_row)
    }

    fn bank_bits(&self) -> u32 {
        log2(self.banks_per_rank)
    }

    fn rank_bits(&self) -> u32 {
        log2(self.ranks_per_channel)
    }

    fn row_bits(&self) -> u32 {
        log2(self.rows_per_bank)
    }

    fn channel_bits(&self) -> u32 {
        log2(self.channels)
    }

    fn address_bits(&self) -> u32 {
        self.offset_bits()
            + self.column_bits()
            + self.bank_bits()
            + self.rank_bits()
            + self.row_bits()
            + self.channel_bits()
    }

    /// Bits of a slot key: channel | rank | bank | row | column.
    pub fn key_bits(&self) -> u32 {
        self.address_bits() - self.offset_bits()
    }

    /// Splits a byte address. Field order from most to least significant is
    /// channel : row : rank : bank : column : byte offset.
    pub fn decode(&self, address: u64) -> Result<DecodedAddress> {
        let capacity = self.capacity_bytes();
        if address >= capacity {
            return Err(Error::AddressOutOfRange { address, capacity });
        }
        let mut a = address >> self.offset_bits();
        let mut take = |bits: u32| {
            let v = (a & ((1u64 << bits) - 1)) as u32;
            a >>= bits;
            v
        };
        let column = take(self.column_bits());
        let bank = take(self.bank_bits());
        let rank = take(self.rank_bits());
        let row = take(self.row_bits());
        let channel = take(self.channel_bits());
        Ok(DecodedAddress {
            channel,
            rank,
            bank,
            row,
            column,
        })
    }

    /// Inverse of [`Geometry::decode`] (byte offset zero).
    pub fn encode(&self, d: &DecodedAddress) -> u64 {
        let mut a = d.channel as u64;
        a = (a << self.row_bits()) | d.row as u64;
        a = (a << self.rank_bits()) | d.rank as u64;
        a = (a << self.bank_bits()) | d.bank as u64;
        a = (a << self.column_bits()) | d.column as u64;
        a << self.offset_bits()
    }

    pub fn contains(&self, d: &DecodedAddress) -> bool {
        d.channel < self.channels
            && d.rank < self.ranks_per_channel
            && d.bank < self.banks_per_rank
            && d.row < self.rows_per_bank
            && d.column < self.cols_per_row
    }

    /// Flat bank index across the whole device.
    pub fn bank_index(&self, channel: u32, bank: BankId) -> usize {
        ((channel * self.ranks_per_channel + bank.rank) * self.banks_per_rank + bank.bank) as usize
    }

    pub fn bank_index_of(&self, d: &DecodedAddress) -> usize {
        self.bank_index(d.channel, d.bank_id())
    }

    /// Inverse of [`Geometry::bank_index`].
    pub fn bank_of_index(&self, index: usize) -> (u32, BankId) {
        let index = index as u32;
        let bank = index % self.banks_per_rank;
        let rank = (index / self.banks_per_rank) % self.ranks_per_channel;
        let channel = index / self.banks_per_channel();
        (channel, BankId::new(rank, bank))
    }

    /// Flat rank index across the whole device.
    pub fn rank_index(&self, channel: u32, rank: u32) -> usize {
        (channel * self.ranks_per_channel + rank) as usize
    }

    /// Packs a slot into a trie key (channel | rank | bank | row | column).
    pub fn slot_key(&self, d: &DecodedAddress) -> u32 {
        let bank_index = self.bank_index_of(d) as u64;
        let key = ((bank_index << self.row_bits() | d.row as u64) << self.column_bits()) | d.column as u64;
        key as u32
    }

    pub fn slot_of_key(&self, key: u32) -> DecodedAddress {
        let key = key as u64;
        let column = (key & ((1u64 << self.column_bits()) - 1)) as u32;
        let row = ((key >> self.column_bits()) & ((1u64 << self.row_bits()) - 1)) as u32;
        let bank_index = (key >> (self.column_bits() + self.row_bits())) as usize;
        let (channel, bank) = self.bank_of_index(bank_index);
        DecodedAddress::new(channel, bank.rank, bank.bank, row, column)
    }

    /// Inclusive key range covering every slot of a bank.
    pub fn bank_key_range(&self, bank_index: usize) -> (u32, u32) {
        let per_bank = self.slots_per_bank();
        let lo = bank_index as u64 * per_bank;
        (lo as u32, (lo + per_bank - 1) as u32)
    }

    /// Key of a whole row: the slot key with the column bits dropped.
    pub fn row_key(&self, d: &DecodedAddress) -> u32 {
        self.slot_key(d) >> self.column_bits()
    }

    /// Global row id used by weak-row files: bank index * rows + row.
    pub fn row_id(&self, d: &DecodedAddress) -> u64 {
        self.bank_index_of(d) as u64 * self.rows_per_bank as u64 + d.row as u64
    }

    pub fn row_of_id(&self, id: u64) -> Result<DecodedAddress> {
        let rows = self.rows_per_bank as u64;
        let bank_index = id / rows;
        if bank_index >= self.total_banks() as u64 {
            return Err(Error::InvalidParameter(format!("row id {id} out of range")));
        }
        let (channel, bank) = self.bank_of_index(bank_index as usize);
        Ok(DecodedAddress::new(channel, bank.rank, bank.bank, (id % rows) as u32, 0))
    }
}
