package ledger;

public class Account {
    private final String owner;
    private long balance;
    private int transactions;

    public Account(String owner, long opening) {
        this.owner = owner;
        this.balance = opening;
    }

    public String getOwner() {
        return owner;
    }

    public boolean withdraw(long amount) {
        if (amount <= 0) {
            return false;
        }
        if (balance < amount) {
            return false;
        }
        balance = balance - amount;
        transactions = transactions + 1;
        return true;
    }

    public void deposit(long amount) {
        if (amount > 0) {
            balance = balance + amount;
            transactions = transactions + 1;
        }
    }

    public long interest(int rate, int days) {
        long daily = balance * rate;
        long total = daily * days;
        return total / 36500;
    }

    public boolean isOverdrawn() {
        return balance < 0;
    }

    public int fee(int count) {
        int base = 2;
        int extra = count - 10;
        if (extra > 0) {
            return base + extra * 3;
        }
        return base;
    }
}
